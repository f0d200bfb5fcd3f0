use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use comspec::corpus::{Corpus, Topic};
use comspec::embedding::{
    embed_corpus, EmbeddingProvider, FileProvider, ProviderSpec, RemoteProvider,
};
use comspec::Error;
use serde_json::{json, Value};

/// Reads one HTTP request and returns its JSON body.
fn read_request(stream: &mut TcpStream) -> Value {
    let mut reader = BufReader::new(stream);
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    serde_json::from_slice(&body).unwrap()
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let reply = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(reply.as_bytes()).unwrap();
}

/// Serves requests with `handler(request_number, texts) -> (status, body)`.
fn serve<F>(handler: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, Vec<String>) -> (&'static str, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let request = read_request(&mut stream);
            let texts = request["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| t.as_str().unwrap().to_string())
                .collect();
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, body) = handler(n, texts);
            respond(&mut stream, status, &body);
        }
    });
    (url, hits)
}

/// Encodes each text as (length, first byte) so order is checkable.
fn echo_vectors(texts: &[String]) -> String {
    let vectors: Vec<Vec<f64>> = texts
        .iter()
        .map(|t| vec![t.len() as f64, f64::from(t.as_bytes()[0])])
        .collect();
    json!({ "vectors": vectors }).to_string()
}

fn quick(url: &str, batch: usize) -> RemoteProvider {
    RemoteProvider::new(url, batch)
        .unwrap()
        .with_retries(2, Duration::from_millis(5))
}

#[test]
fn remote_vectors_follow_request_order_across_batches() {
    let (url, hits) = serve(|_, texts| ("200 OK", echo_vectors(&texts)));
    let provider = quick(&url, 2);
    let vectors = provider.embed_texts(&["a", "bb", "ccc"]).unwrap();
    let got: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_slice().to_vec()).collect();
    assert_eq!(got, [vec![1.0, 97.0], vec![2.0, 98.0], vec![3.0, 99.0]]);
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[test]
fn remote_count_mismatch_is_a_protocol_error() {
    let (url, _) = serve(|_, _| ("200 OK", json!({"vectors": [[1.0, 0.0]]}).to_string()));
    let err = quick(&url, 8).embed_texts(&["a", "b"]).unwrap_err();
    assert!(
        matches!(err, Error::Provider(ref m) if m.contains("protocol")),
        "{err}"
    );
    assert!(err.is_provider());
}

#[test]
fn remote_retries_transient_failures() {
    let (url, hits) = serve(|n, texts| {
        if n < 2 {
            ("503 Service Unavailable", String::new())
        } else {
            ("200 OK", echo_vectors(&texts))
        }
    });
    let vectors = quick(&url, 8).embed_texts(&["a"]).unwrap();
    assert_eq!(vectors.len(), 1);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_gives_up_after_configured_retries() {
    let (url, hits) = serve(|_, _| ("500 Internal Server Error", String::new()));
    let err = quick(&url, 8).embed_texts(&["a"]).unwrap_err();
    assert!(err.is_provider());
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_client_errors_are_not_retried() {
    let (url, hits) = serve(|_, _| ("400 Bad Request", String::new()));
    assert!(quick(&url, 8).embed_texts(&["a"]).is_err());
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn remote_endpoint_down_fails_after_retries() {
    // Bind then drop to get a port nothing listens on.
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let err = quick(&format!("http://127.0.0.1:{port}"), 8)
        .embed_texts(&["a"])
        .unwrap_err();
    assert!(
        matches!(err, Error::Provider(ref m) if m.contains("3 attempts")),
        "{err}"
    );
}

#[test]
fn remote_embeds_a_whole_corpus() {
    let (url, _) = serve(|_, texts| ("200 OK", echo_vectors(&texts)));
    let topic = Topic::from_texts("t", [("d", "One. Three.")], vec![]).unwrap();
    let corpus = Corpus::new(vec![topic]).unwrap();
    let spec: ProviderSpec = format!("remote:{url}").parse().unwrap();
    let embedded = embed_corpus(&corpus, spec.build(0).unwrap().as_ref()).unwrap();
    assert_eq!(
        embedded.topics[0].document_vectors[0].as_slice(),
        [5.0, 81.5]
    );
}

#[test]
fn file_provider_reads_vectors_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.jsonl");
    std::fs::write(
        &path,
        "{\"key\":\"t1/d0/s0\",\"vector\":[0.1,0.2]}\n\n{\"key\":\"t1/d0/s1\",\"vector\":[0.3,0.4]}\n",
    )
    .unwrap();
    let provider = FileProvider::open(&path).unwrap();
    assert_eq!(provider.len(), 2);
    let topic = Topic::from_texts("t1", [("d", "First. Second.")], vec![]).unwrap();
    let vectors = provider.embed_topic(&topic).unwrap();
    assert_eq!(vectors[0].as_slice(), [0.1, 0.2]);
    assert_eq!(vectors[1].as_slice(), [0.3, 0.4]);

    let longer = Topic::from_texts("t1", [("d", "First. Second. Third.")], vec![]).unwrap();
    match provider.embed_topic(&longer) {
        Err(Error::MissingEmbedding(key)) => assert_eq!(key, "t1/d0/s2"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn file_provider_rejects_duplicates_and_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.jsonl");
    std::fs::write(
        &path,
        "{\"key\":\"k\",\"vector\":[1]}\n{\"key\":\"k\",\"vector\":[2]}\n",
    )
    .unwrap();
    assert!(matches!(
        FileProvider::open(&path),
        Err(Error::DuplicateEmbedding(_))
    ));
    std::fs::write(&path, "not json\n").unwrap();
    assert!(FileProvider::open(&path).unwrap_err().is_provider());
}

#[test]
fn mixed_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.jsonl");
    std::fs::write(
        &path,
        "{\"key\":\"t/d0/s0\",\"vector\":[1,0,0,0]}\n{\"key\":\"t/d0/s1\",\"vector\":[1,0,0,0,0,0,0,0]}\n",
    )
    .unwrap();
    let topic = Topic::from_texts("t", [("d", "One. Two.")], vec![]).unwrap();
    let corpus = Corpus::new(vec![topic]).unwrap();
    let err = embed_corpus(&corpus, &FileProvider::open(&path).unwrap()).unwrap_err();
    assert!(matches!(
        err,
        Error::DimensionMismatch {
            expected: 4,
            found: 8
        }
    ));
}
