fn main() { std::process::exit(affine_ekf::cli::cli_main(std::env::args().collect())); }
