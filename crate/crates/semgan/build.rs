//! Embeds a `git describe`-style version string as `SEMGAN_VERSION`.

use std::path::Path;
use std::process::Command;

fn main() {
    let pkg = std::env::var("CARGO_PKG_VERSION").unwrap_or_default();
    let described = Command::new("git")
        .args(["describe", "--tags", "--always"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    let version = match described {
        Some(g) => format!("{pkg}+{g}"),
        None => pkg,
    };
    println!("cargo:rustc-env=SEMGAN_VERSION={version}");
    for p in ["../../.git/HEAD", "../../.git/refs"] {
        if Path::new(p).exists() {
            println!("cargo:rerun-if-changed={p}");
        }
    }
    println!("cargo:rerun-if-changed=build.rs");
}
