//! Minimal HTTP/1.1 plumbing over std TCP sockets: a blocking JSON
//! POST client with timeout/retry knobs and a thread-per-connection
//! server loop for the mock services. Only what the pipeline needs —
//! no keep-alive, no chunked encoding.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub timeout: Duration,
    pub retries: u32,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions { timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS), retries: 0 }
    }
}

/// POST a JSON body and decode a JSON response. `base` is
/// `host:port` or `http://host:port`; `path` starts with `/`.
pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    base: &str,
    path: &str,
    req: &Req,
    opts: &HttpOptions,
) -> Result<Resp> {
    let body = serde_json::to_string(req)?;
    let mut last_err = None;
    for _ in 0..=opts.retries {
        match post_once(base, path, &body, opts.timeout) {
            Ok(resp) => return Ok(resp),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn post_once<Resp: DeserializeOwned>(
    base: &str,
    path: &str,
    body: &str,
    timeout: Duration,
) -> Result<Resp> {
    let addr = base.strip_prefix("http://").unwrap_or(base).trim_end_matches('/');
    let mut stream = TcpStream::connect(addr).with_context(|| format!("connect {addr}"))?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    let request = format!(
        "POST {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes())?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).context("read response")?;
    let (status, resp_body) = parse_response(&raw)?;
    if status != 200 {
        let msg = serde_json::from_str::<crate::wire::ErrorResponse>(&resp_body)
            .map(|e| e.error)
            .unwrap_or(resp_body);
        bail!("{path} returned status {status}: {msg}");
    }
    serde_json::from_str(&resp_body).with_context(|| format!("decode {path} response"))
}

fn parse_response(raw: &[u8]) -> Result<(u16, String)> {
    let text = String::from_utf8_lossy(raw);
    let Some((head, body)) = text.split_once("\r\n\r\n") else {
        bail!("malformed response: no header terminator");
    };
    let status_line = head.lines().next().unwrap_or("");
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .with_context(|| format!("malformed status line {status_line:?}"))?;
    // Connection: close, so the body runs to EOF; trust it over
    // Content-Length.
    Ok((status, body.to_string()))
}

/// A parsed incoming request.
pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

/// Run a blocking accept loop, one thread per connection. The handler
/// returns a JSON body or an error (sent back as a 400 with an
/// `{"error": ...}` body).
pub fn serve(
    listener: TcpListener,
    handler: Arc<dyn Fn(&Request) -> Result<String> + Send + Sync>,
) -> Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(_) => continue,
        };
        let handler = Arc::clone(&handler);
        std::thread::spawn(move || {
            let _ = handle_connection(stream, &handler);
        });
    }
    Ok(())
}

fn handle_connection(
    mut stream: TcpStream,
    handler: &Arc<dyn Fn(&Request) -> Result<String> + Send + Sync>,
) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(DEFAULT_TIMEOUT_SECS)))?;
    let request = read_request(&mut stream)?;
    let (status, body) = match handler(&request) {
        Ok(body) => ("200 OK", body),
        Err(e) => (
            "400 Bad Request",
            serde_json::to_string(&crate::wire::ErrorResponse { error: format!("{e:#}") })?,
        ),
    };
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes())?;
    Ok(())
}

fn read_request(stream: &mut TcpStream) -> Result<Request> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            bail!("connection closed before headers");
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
        if buf.len() > 1 << 20 {
            bail!("headers too large");
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).into_owned();
    let mut lines = head.lines();
    let request_line = lines.next().unwrap_or("");
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let content_length: usize = lines
        .filter_map(|l| l.split_once(':'))
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.trim().parse().ok())
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buf.len() < body_start + content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            bail!("connection closed mid-body");
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let body = String::from_utf8_lossy(&buf[body_start..body_start + content_length]).into_owned();
    Ok(Request { method, path, body })
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}
