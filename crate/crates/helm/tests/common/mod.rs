#![allow(dead_code)]

use std::path::PathBuf;

use helm::config::{load_file, Config};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn shipped(name: &str) -> Config {
    load_file(&repo_path(&format!("configs/{name}.toml"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}
