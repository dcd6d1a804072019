use linkvar::grid::{assemble_operator, build_grid, Potential, ProblemSpec};
use linkvar::nonlinearity::{FFamily, GFamily, NonlinearitySpec};
use linkvar::spectral::eigendecompose;

fn main() {
    let spec = ProblemSpec {
        n_dim: 3, k_dim: 2, a: 1.0,
        potential: Potential::Constant(-9.0),
        lambda: 0.0,
        nonlinearity: NonlinearitySpec::new(FFamily::Power, 4.0, GFamily::Power, 3.0, 1.0).unwrap(),
    };
    let g = build_grid(&spec, 96, 96, 6.0, 4.0).unwrap();
    let op = assemble_operator(&spec, &g);
    let t0 = std::time::Instant::now();
    let split = eigendecompose(&op, &g).unwrap();
    println!("decompose time: {:?}", t0.elapsed());
    let s = split.summary();
    println!("n_minus = {}, mu0 = {:.6}, gap_tol = {:.3e}", s.n_minus, s.mu0, s.gap_tol);
    println!("min_abs = {:.6e}, max_abs = {:.6e}", s.min_abs_eigenvalue, s.max_abs_eigenvalue);
    let negs: Vec<f64> = split.eigvals().iter().copied().filter(|l| *l < 0.0).collect();
    println!("negative eigenvalues: {:?}", &negs[..negs.len().min(40)]);
    println!("smallest positives: {:?}", &split.eigvals()[split.lowest_positive()..split.lowest_positive()+6]);
}
