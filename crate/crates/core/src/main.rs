use limitsetlab::cli;

fn main() {
    if let Err(e) = cli::init_threads() {
        eprintln!("error: {e}");
        std::process::exit(cli::exit::USAGE);
    }
    let code = cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
