#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn gssd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gssd"))
}

pub fn run(args: &[&str]) -> Output {
    gssd().args(args).output().expect("spawn gssd")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `key=value` field of the last stdout line that has it.
pub fn field(out: &str, key: &str) -> Option<String> {
    let prefix = format!("{key}=");
    out.lines()
        .rev()
        .flat_map(|l| l.split_whitespace())
        .find_map(|w| w.strip_prefix(&prefix).map(str::to_owned))
}

fn idx_images(images: &[Vec<u8>], side: usize) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3];
    for v in [images.len(), side, side] {
        b.extend((v as u32).to_be_bytes());
    }
    images.iter().for_each(|img| b.extend(img));
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 1];
    b.extend((labels.len() as u32).to_be_bytes());
    b.extend(labels);
    b
}

/// Toy 28x28 digits: class `k` is a bright bar at row band `k`, with a
/// little per-sample jitter, so a network can learn it in one epoch.
fn toy_digits(n: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 10;
        let mut img = vec![0u8; 28 * 28];
        let row = 2 + 2 * k + (next() % 2) as usize;
        for x in 4..24 {
            img[row * 28 + x] = 200 + (next() % 56) as u8;
        }
        for _ in 0..20 {
            img[(next() % 784) as usize] = (next() % 90) as u8;
        }
        images.push(img);
        labels.push(k as u8);
    }
    (images, labels)
}

/// A data root with a small MNIST-format dataset under `mnist/`.
pub fn toy_data_root(dir: &Path, train: usize, test: usize) -> PathBuf {
    let mnist = dir.join("mnist");
    std::fs::create_dir_all(&mnist).unwrap();
    for (split, n, seed) in [("train", train, 1), ("t10k", test, 2)] {
        let (images, labels) = toy_digits(n, seed);
        std::fs::write(mnist.join(format!("{split}-images-idx3-ubyte")), idx_images(&images, 28)).unwrap();
        std::fs::write(mnist.join(format!("{split}-labels-idx1-ubyte")), idx_labels(&labels)).unwrap();
    }
    dir.to_owned()
}

/// Location of the real MNIST files, if present.
pub fn real_data_root() -> Option<PathBuf> {
    let root = std::env::var_os("GSSD_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    root.join("mnist/t10k-images-idx3-ubyte").exists().then_some(root)
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub const SMALL: &str = "dataset = mnist\nwidth_multiplier = 0.5\nepochs = 1\nbatch_size = 32\nseed = 3\n";

pub fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}
