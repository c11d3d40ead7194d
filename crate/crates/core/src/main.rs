//! Command-line entry point.

fn main() {
    std::process::exit(paneldid::cli::main());
}
