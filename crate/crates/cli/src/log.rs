//! Minimal stderr logger gated by S2V_LOG_LEVEL in {error, info, debug}.

use std::sync::OnceLock;

#[derive(PartialEq, PartialOrd, Copy, Clone)]
enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        match std::env::var("S2V_LOG_LEVEL").as_deref() {
            Ok("error") => Level::Error,
            Ok("debug") => Level::Debug,
            _ => Level::Info,
        }
    })
}

pub fn error(msg: &str) {
    eprintln!("error: {msg}");
}

pub fn warn(msg: &str) {
    if level() >= Level::Info {
        eprintln!("warning: {msg}");
    }
}

pub fn info(msg: &str) {
    if level() >= Level::Info {
        eprintln!("{msg}");
    }
}

#[allow(dead_code)]
pub fn debug(msg: &str) {
    if level() >= Level::Debug {
        eprintln!("debug: {msg}");
    }
}
