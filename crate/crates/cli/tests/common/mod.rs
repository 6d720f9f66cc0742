#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn legalner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legalner")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Trains the toy fixture into `out`, scoring on the training file itself.
pub fn train_toy(out: &Path, extra: &[&str]) -> Output {
    let (config, train) = (fixture("toy_config.json"), fixture("toy_train.conll"));
    let mut args = vec!["train", "--config", p(&config), "--train", p(&train), "--dev", p(&train), "--out", p(out)];
    args.extend_from_slice(extra);
    legalner(&args)
}
