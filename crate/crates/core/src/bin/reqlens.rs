use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("REQLENS_LOG")).init();
    let code = reqlens::cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
