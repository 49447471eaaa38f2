fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let code = mcbench::bench::cli::cli_main(&argv, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
