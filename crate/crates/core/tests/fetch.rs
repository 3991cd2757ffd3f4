use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;

use afrr_core::dataset::fetch_dataset;
use afrr_core::Error;
use sha2::{Digest, Sha256};

/// Serves `body` once with the given status line, returns the base URL.
fn serve_once(status: &'static str, body: &'static [u8]) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = [0u8; 4096];
        let _ = stream.read(&mut buf);
        let head = format!("HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len());
        stream.write_all(head.as_bytes()).unwrap();
        stream.write_all(body).unwrap();
    });
    format!("http://{addr}")
}

const BODY: &[u8] = b"timestamp,afrr_pos\n2020-01-01T00:00:00Z,1.0\n";

fn listing(dir: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn verified_download_lands_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let url = format!("{}/archive/afrr.csv", serve_once("200 OK", BODY));
    let sha = hex::encode(Sha256::digest(BODY));
    let path = fetch_dataset(&url, dir.path(), &sha.to_uppercase()).unwrap();
    assert_eq!(path, dir.path().join("afrr.csv"));
    assert_eq!(std::fs::read(&path).unwrap(), BODY);
    assert_eq!(listing(dir.path()), ["afrr.csv"]);
}

#[test]
fn checksum_mismatch_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let url = format!("{}/afrr.csv", serve_once("200 OK", BODY));
    match fetch_dataset(&url, dir.path(), &"0".repeat(64)) {
        Err(Error::Checksum { actual, .. }) => assert_eq!(actual, hex::encode(Sha256::digest(BODY))),
        other => panic!("{other:?}"),
    }
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn http_error_is_a_network_error() {
    let dir = tempfile::tempdir().unwrap();
    let url = format!("{}/afrr.csv", serve_once("404 Not Found", b"gone"));
    assert!(matches!(fetch_dataset(&url, dir.path(), "00"), Err(Error::Network(_))));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn refused_connection_is_a_network_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_dataset(&format!("http://127.0.0.1:{port}/x.csv"), dir.path(), "00").unwrap_err();
    assert!(matches!(err, Error::Network(_)), "{err:?}");
    assert_eq!(err.code(), "network");
}
