//! Client side of the remote model protocol over a child process's stdio or
//! a TCP connection.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{Map, Value};

use super::protocol::{decode_response, parse_response, Request};
use super::{Prediction, TargetModel, Task};
use crate::error::{Error, Result};
use crate::image::ImagePair;

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Spawn `program args...` and talk over its stdin/stdout.
    Stdio { program: String, args: Vec<String> },
    /// Connect to `host:port`.
    Tcp { address: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteEndpoint {
    pub transport: Transport,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl RemoteEndpoint {
    pub fn new(transport: Transport) -> Self {
        RemoteEndpoint {
            transport,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_in_flight: 1,
        }
    }

    /// `tcp://host:port` or `stdio:program arg...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let transport = if let Some(addr) = spec.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(Error::Config("tcp endpoint needs host:port".into()));
            }
            Transport::Tcp {
                address: addr.to_string(),
            }
        } else if let Some(cmd) = spec.strip_prefix("stdio:") {
            let mut words = cmd.split_whitespace().map(str::to_string);
            let program = words
                .next()
                .ok_or_else(|| Error::Config("stdio endpoint needs a command".into()))?;
            Transport::Stdio {
                program,
                args: words.collect(),
            }
        } else {
            return Err(Error::Config(format!(
                "endpoint '{spec}' must start with tcp:// or stdio:"
            )));
        };
        Ok(RemoteEndpoint::new(transport))
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::Config("remote timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max in-flight requests must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> String {
        match &self.transport {
            Transport::Tcp { address } => format!("tcp://{address}"),
            Transport::Stdio { program, args } => {
                let mut s = format!("stdio:{program}");
                for a in args {
                    s.push(' ');
                    s.push_str(a);
                }
                s
            }
        }
    }
}

type Reply = Result<Map<String, Value>>;

#[derive(Default)]
struct Pending {
    waiters: HashMap<String, Sender<Reply>>,
    closed: Option<String>,
}

impl Pending {
    fn fail_all(&mut self, make: impl Fn() -> Error) {
        for (_, tx) in self.waiters.drain() {
            let _ = tx.send(Err(make()));
        }
    }
}

pub struct RemoteModel {
    task: Task,
    endpoint: RemoteEndpoint,
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    child: Option<Child>,
    socket: Option<TcpStream>,
    reader: Option<JoinHandle<()>>,
}

impl RemoteModel {
    pub fn connect(endpoint: &RemoteEndpoint, task: Task) -> Result<Self> {
        endpoint.validate()?;
        let (reader, writer, child, socket): (
            Box<dyn Read + Send>,
            Box<dyn Write + Send>,
            Option<Child>,
            Option<TcpStream>,
        ) = match &endpoint.transport {
            Transport::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::io(program, e))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                (Box::new(stdout), Box::new(stdin), Some(child), None)
            }
            Transport::Tcp { address } => {
                let stream = TcpStream::connect(address).map_err(|e| Error::io(address, e))?;
                let _ = stream.set_nodelay(true);
                stream
                    .set_write_timeout(Some(Duration::from_millis(endpoint.timeout_ms)))
                    .map_err(|e| Error::io(address, e))?;
                let read_half = stream.try_clone().map_err(|e| Error::io(address, e))?;
                let write_half = stream.try_clone().map_err(|e| Error::io(address, e))?;
                (Box::new(read_half), Box::new(write_half), None, Some(stream))
            }
        };

        let pending = Arc::new(Mutex::new(Pending::default()));
        let routes = Arc::clone(&pending);
        let handle = std::thread::Builder::new()
            .name("remote-reader".into())
            .spawn(move || read_loop(reader, routes))
            .map_err(|e| Error::Oracle(format!("cannot start reader thread: {e}")))?;

        Ok(RemoteModel {
            task,
            endpoint: endpoint.clone(),
            writer: Mutex::new(Some(writer)),
            pending,
            next_id: AtomicU64::new(1),
            child,
            socket,
            reader: Some(handle),
        })
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    fn send(&self, pair: &ImagePair) -> Result<Prediction> {
        let id = format!("q{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let line = Request::new(id.clone(), self.task, pair).to_line();
        let (tx, rx) = channel();
        {
            let mut p = self.pending.lock().unwrap();
            if let Some(reason) = &p.closed {
                return Err(Error::Oracle(format!("remote endpoint unavailable: {reason}")));
            }
            p.waiters.insert(id.clone(), tx);
        }
        let written = {
            let mut w = self.writer.lock().unwrap();
            match w.as_mut() {
                Some(w) => w
                    .write_all(line.as_bytes())
                    .and_then(|_| w.write_all(b"\n"))
                    .and_then(|_| w.flush()),
                None => Err(std::io::Error::other("connection closed")),
            }
        };
        if let Err(e) = written {
            self.pending.lock().unwrap().waiters.remove(&id);
            return Err(Error::Oracle(format!("cannot send request {id}: {e}")));
        }

        match rx.recv_timeout(Duration::from_millis(self.endpoint.timeout_ms)) {
            Ok(Ok(obj)) => decode_response(&obj, self.task, pair.dims()),
            Ok(Err(e)) => Err(e),
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().unwrap().waiters.remove(&id);
                Err(Error::Timeout {
                    id,
                    timeout_ms: self.endpoint.timeout_ms,
                })
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Oracle("remote reader stopped".into()))
            }
        }
    }
}

fn read_loop(reader: Box<dyn Read + Send>, pending: Arc<Mutex<Pending>>) {
    let reader = BufReader::new(reader);
    let mut reason = "remote endpoint closed the connection".to_string();
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                reason = format!("read failed: {e}");
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_response(&line) {
            Ok((id, obj)) => {
                let tx = pending.lock().unwrap().waiters.remove(&id);
                match tx {
                    Some(tx) => {
                        let _ = tx.send(Ok(obj));
                    }
                    None => log::warn!("dropping response for unknown request id {id:?}"),
                }
            }
            Err(e) => {
                // Without an id the reply cannot be routed; every waiting
                // request sees the malformed payload.
                log::warn!("{e}");
                let msg = e.to_string();
                pending.lock().unwrap().fail_all(|| match &e {
                    Error::Protocol { message, excerpt } => Error::Protocol {
                        message: message.clone(),
                        excerpt: excerpt.clone(),
                    },
                    _ => Error::Oracle(msg.clone()),
                });
            }
        }
    }
    let mut p = pending.lock().unwrap();
    p.closed = Some(reason.clone());
    p.fail_all(|| Error::Oracle(reason.clone()));
}

impl TargetModel for RemoteModel {
    fn task(&self) -> Task {
        self.task
    }

    fn predict(&self, pair: &ImagePair) -> Result<Prediction> {
        self.send(pair)
    }

    fn max_in_flight(&self) -> Option<usize> {
        Some(self.endpoint.max_in_flight)
    }
}

impl Drop for RemoteModel {
    fn drop(&mut self) {
        // Closing our write side lets a well-behaved server exit on EOF.
        self.writer.lock().unwrap().take();
        if let Some(s) = &self.socket {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(mut child) = self.child.take() {
            let deadline = std::time::Instant::now() + Duration::from_millis(500);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if std::time::Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(10))
                    }
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
    }
}
