//! External metrics behind a newline-delimited JSON protocol on
//! stdin/stdout.
//!
//! The harness writes `{"hello":{"protocol":"percepbench/1"}}` and the
//! adapter answers with its descriptor. Then each request line names a test
//! and reference stimulus (16-bit sRGB PNG, or a directory of frames for
//! video) and the adapter answers `{"request_id":N,"score":x}` or
//! `{"request_id":N,"error":"..."}`, in any order. Closing stdin ends the
//! session.

pub mod protocol;

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::metrics::Metric;
use crate::pngio::read_stimulus;
pub use protocol::{AdapterRequest, AdapterResponse, BadLine, Hello, HelloRequest, HelloResponse, COLOR_ENCODING, PROTOCOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("cannot start adapter '{cmd}': {msg}")]
    Spawn { cmd: String, msg: String },
    #[error("handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("no response within {0} s")]
    Timeout(f64),
    #[error("non-numeric score {0}")]
    NonNumericScore(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdapterOptions {
    pub timeout: Duration,
    pub in_flight: usize,
}

impl Default for AdapterOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(300), in_flight: 4 }
    }
}

/// A running adapter process that has completed the handshake.
pub struct AdapterProcess {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Option<String>>,
    hello: Hello,
}

fn shell(cmd: &str) -> Command {
    let mut c = Command::new("sh");
    c.arg("-c").arg(cmd);
    c
}

impl AdapterProcess {
    pub fn spawn(cmd: &str, timeout: Duration) -> Result<Self, AdapterError> {
        let mut child = shell(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Spawn { cmd: cmd.into(), msg: e.to_string() })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        let stdin = child.stdin.take();
        let mut p = Self { child, stdin, lines: rx, hello: placeholder_hello() };
        let hello = p.handshake(timeout);
        match hello {
            Ok(h) => {
                p.hello = h;
                Ok(p)
            }
            Err(e) => {
                p.kill();
                Err(e)
            }
        }
    }

    fn handshake(&mut self, timeout: Duration) -> Result<Hello, AdapterError> {
        let line = serde_json::to_string(&HelloRequest::current()).expect("hello serializes");
        self.send(&line).map_err(|e| AdapterError::HandshakeFailed(format!("write failed: {e}")))?;
        match self.lines.recv_timeout(timeout) {
            Ok(Some(l)) => serde_json::from_str::<HelloResponse>(&l)
                .map(|h| h.hello)
                .map_err(|e| AdapterError::HandshakeFailed(format!("{e}: {l}"))),
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                Err(AdapterError::HandshakeFailed("adapter exited during handshake".into()))
            }
            Err(RecvTimeoutError::Timeout) => {
                Err(AdapterError::HandshakeFailed(format!("no hello within {} s", timeout.as_secs_f64())))
            }
        }
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    fn send(&mut self, line: &str) -> std::io::Result<()> {
        let w = self.stdin.as_mut().ok_or_else(|| std::io::Error::other("stdin closed"))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()
    }

    fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Closes stdin and waits for the process to exit.
    pub fn finish(mut self) {
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        self.kill();
    }
}

fn placeholder_hello() -> Hello {
    Hello {
        name: String::new(),
        supports_video: false,
        higher_is_better: false,
        input_space: String::new(),
        color: None,
        extra: Default::default(),
    }
}

enum Session {
    Done,
    /// The process is gone; nothing more can be sent to it.
    Exited,
    /// A request timed out and the process was killed; the others were
    /// requeued.
    TimedOut,
}

/// Drives one adapter process over `queue` until the queue is drained or
/// the process becomes unusable.
fn drive(
    p: &mut AdapterProcess,
    queue: &mut VecDeque<AdapterRequest>,
    opts: AdapterOptions,
    out: &mut Vec<AdapterResponse>,
) -> Session {
    let mut outstanding: HashMap<u64, (Instant, AdapterRequest)> = HashMap::new();
    let mut order: VecDeque<u64> = VecDeque::new();
    loop {
        while outstanding.len() < opts.in_flight.max(1) {
            let Some(req) = queue.pop_front() else { break };
            if p.send(&req.to_line()).is_err() {
                queue.push_front(req);
                fail_all(&mut outstanding, &mut order, out, "adapter exited before responding");
                return Session::Exited;
            }
            order.push_back(req.request_id);
            outstanding.insert(req.request_id, (Instant::now() + opts.timeout, req));
        }
        if outstanding.is_empty() {
            return Session::Done;
        }
        let (&first, _) = outstanding.iter().min_by_key(|(id, (d, _))| (*d, **id)).expect("non-empty");
        let deadline = outstanding[&first].0;
        let wait = deadline.saturating_duration_since(Instant::now());
        match p.lines.recv_timeout(wait) {
            Ok(Some(line)) => {
                let resp = match AdapterResponse::parse_line(&line) {
                    Ok(r) => r,
                    Err(BadLine::Invalid { request_id, msg }) => {
                        AdapterResponse::error(request_id, format!("invalid response: {msg}"))
                    }
                    Err(BadLine::NonNumericScore { request_id, raw }) => {
                        AdapterResponse::error(request_id, AdapterError::NonNumericScore(raw).to_string())
                    }
                    Err(BadLine::Malformed(msg)) => {
                        // No usable id: charge the oldest outstanding request.
                        let Some(&id) = order.front() else { continue };
                        AdapterResponse::error(id, format!("malformed response: {msg}"))
                    }
                };
                if outstanding.remove(&resp.request_id).is_some() {
                    order.retain(|&i| i != resp.request_id);
                    out.push(resp);
                }
            }
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                fail_all(&mut outstanding, &mut order, out, "adapter exited before responding");
                return Session::Exited;
            }
            Err(RecvTimeoutError::Timeout) => {
                let (_, req) = outstanding.remove(&first).expect("present");
                order.retain(|&i| i != first);
                out.push(AdapterResponse::error(
                    req.request_id,
                    AdapterError::Timeout(opts.timeout.as_secs_f64()).to_string(),
                ));
                p.kill();
                let mut rest: Vec<_> = outstanding.drain().map(|(_, (_, r))| r).collect();
                rest.sort_by_key(|r| r.request_id);
                for r in rest.into_iter().rev() {
                    queue.push_front(r);
                }
                return Session::TimedOut;
            }
        }
    }
}

fn fail_all(
    outstanding: &mut HashMap<u64, (Instant, AdapterRequest)>,
    order: &mut VecDeque<u64>,
    out: &mut Vec<AdapterResponse>,
    msg: &str,
) {
    for id in order.drain(..) {
        if outstanding.remove(&id).is_some() {
            out.push(AdapterResponse::error(id, msg));
        }
    }
}

/// Runs all requests through the adapter started by `cmd`. Every request
/// gets exactly one response, returned in arrival order. Only a failed
/// start or handshake is an error; per-request failures (timeouts, bad
/// lines, a crash mid-run) become error responses.
///
/// A timed-out adapter is killed and restarted for the remaining requests.
/// After a crash the remaining requests are reported as not run.
pub fn run_adapter(
    cmd: &str,
    requests: Vec<AdapterRequest>,
    opts: AdapterOptions,
) -> Result<(Hello, Vec<AdapterResponse>), AdapterError> {
    let mut p = AdapterProcess::spawn(cmd, opts.timeout)?;
    let hello = p.hello().clone();
    let mut queue: VecDeque<AdapterRequest> = requests.into();
    let mut out = Vec::with_capacity(queue.len());
    loop {
        match drive(&mut p, &mut queue, opts, &mut out) {
            Session::Done => {
                p.finish();
                break;
            }
            Session::Exited => {
                p.kill();
                for r in queue.drain(..) {
                    out.push(AdapterResponse::error(r.request_id, "not run: adapter exited"));
                }
                break;
            }
            Session::TimedOut => match AdapterProcess::spawn(cmd, opts.timeout) {
                Ok(np) => p = np,
                Err(e) => {
                    for r in queue.drain(..) {
                        out.push(AdapterResponse::error(r.request_id, format!("not run: restart failed: {e}")));
                    }
                    break;
                }
            },
        }
    }
    Ok((hello, out))
}

/// Scores one request with an in-process metric. Relative paths resolve
/// against `base` when given.
pub fn answer(metric: &dyn Metric, req: &AdapterRequest, base: Option<&Path>) -> AdapterResponse {
    let id = req.request_id;
    if req.color_encoding != COLOR_ENCODING {
        return AdapterResponse::error(id, format!("unsupported color_encoding '{}'", req.color_encoding));
    }
    let resolve = |p: &str| match base {
        Some(b) => b.join(p),
        None => Path::new(p).to_path_buf(),
    };
    for p in [&req.test_path, &req.ref_path] {
        if !resolve(p).exists() {
            return AdapterResponse::error(id, format!("missing input: {p}"));
        }
    }
    let load = |p: &str| read_stimulus(&resolve(p), req.ppd, req.fps);
    let (t, r) = match (load(&req.test_path), load(&req.ref_path)) {
        (Ok(t), Ok(r)) => (t, r),
        (Err(e), _) | (_, Err(e)) => return AdapterResponse::error(id, e.to_string()),
    };
    if t.frames > 1 && !metric.descriptor().supports_video {
        return AdapterResponse::error(id, "video input to an image metric");
    }
    match metric.score(&t, &r, None) {
        Ok(q) => AdapterResponse::score(id, q),
        Err(e) => AdapterResponse::error(id, e.to_string()),
    }
}

/// Serves `metric` over the protocol until `input` ends. Lines that cannot
/// be attributed to a request id are reported on stderr and skipped.
pub fn serve<R: BufRead, W: Write>(metric: &dyn Metric, base: Option<&Path>, input: R, mut output: W) -> std::io::Result<()> {
    let mut lines = input.lines();
    let Some(first) = lines.next().transpose()? else { return Ok(()) };
    match serde_json::from_str::<HelloRequest>(&first) {
        Ok(h) if h.hello.protocol == PROTOCOL => {}
        Ok(h) => return Err(std::io::Error::other(format!("unsupported protocol '{}'", h.hello.protocol))),
        Err(e) => return Err(std::io::Error::other(format!("expected hello: {e}"))),
    }
    let hello = HelloResponse { hello: Hello::from_descriptor(metric.descriptor()) };
    writeln!(output, "{}", serde_json::to_string(&hello).expect("hello serializes"))?;
    output.flush()?;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match AdapterRequest::parse_line(&line) {
            Ok(req) => answer(metric, &req, base),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("request_id").and_then(|x| x.as_u64()));
                match id {
                    Some(id) => AdapterResponse::error(id, "malformed request"),
                    None => {
                        eprintln!("skipping unattributable request line: {e}");
                        continue;
                    }
                }
            }
        };
        writeln!(output, "{}", resp.to_line())?;
        output.flush()?;
    }
    Ok(())
}
