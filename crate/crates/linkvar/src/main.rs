fn main() { std::process::exit(linkvar::cli::main()); }
