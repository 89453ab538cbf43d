#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub const DATE: &str = "2013-05-01";

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_footprint"));
    for var in ["STORE_ROOT", "BIND_ADDR", "RADIUS_M", "MIN_DWELL_S", "VISUAL_GAP_S", "MERGE_RADIUS_M"] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn footprint")
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(DATE)
}

pub fn manifest() -> PathBuf {
    fixture_dir().join("manifest.json")
}

pub fn golden_summary() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/2013-05-01.summary.txt")).unwrap()
}

pub fn ingest_fixture(store: &Path) -> Output {
    run(&["ingest", "--manifest", manifest().to_str().unwrap(), "--store", store.to_str().unwrap()])
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A running `footprint serve` process.
pub struct Server {
    pub child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(store: &Path) -> Server {
        let mut child = bin()
            .args(["serve", "--store", store.to_str().unwrap(), "--bind", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn footprint serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_string();
        Server { child, addr }
    }

    pub fn request(&self, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
        request(&self.addr, method, path, body)
    }

    /// Writes a request and returns without waiting for the reply.
    pub fn fire(&self, method: &str, path: &str, body: Option<&str>) -> TcpStream {
        let mut stream = TcpStream::connect(&self.addr).unwrap();
        stream.write_all(raw_request(method, path, body).as_bytes()).unwrap();
        stream
    }

    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn raw_request(method: &str, path: &str, body: Option<&str>) -> String {
    let body = body.unwrap_or("");
    format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
}

/// One HTTP/1.1 exchange over a fresh connection.
pub fn request(addr: &str, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    stream.write_all(raw_request(method, path, body).as_bytes()).unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let text = String::from_utf8_lossy(&raw);
    let (head, body) = text.split_once("\r\n\r\n").unwrap_or((&text, ""));
    let status = head.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    (status, body.to_string())
}
