use std::io;

fn main() {
    let code = twoport_scenario::run_cli(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
