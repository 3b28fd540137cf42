//! A backend living in a child process, spoken to over stdin/stdout with
//! the frames in [`super::wire`].

use std::io::Write;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use image::RgbImage;
use log::{debug, warn};

use crate::logits::Logits;

use super::wire::{self, Frame, FrameReader, WireError, FLAG_CONCURRENT};
use super::{check_output, BackendError, SegmentationBackend, TileContext};

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Run through `sh -c`.
    pub command: String,
    /// Per-tile deadline; `None` waits forever.
    pub timeout: Option<Duration>,
    /// How long to wait for an `SGH1` frame after start-up.
    pub handshake_wait: Duration,
    /// Process count when the handshake advertises concurrency.
    pub max_workers: usize,
}

impl ExternalConfig {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout: None,
            handshake_wait: Duration::from_millis(500),
            max_workers: 1,
        }
    }
}

struct Worker {
    child: Child,
    /// Request bytes go through a writer thread so a stalled child cannot
    /// block the caller past its timeout.
    requests: Option<Sender<Vec<u8>>>,
    frames: Receiver<Result<Frame, WireError>>,
    dead: Option<String>,
}

impl Worker {
    fn spawn(command: &str) -> Result<Self, BackendError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        // A process group of its own, so killing the worker also takes down
        // anything `sh` forked rather than exec'd.
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn { command: command.to_string(), source })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");

        let (frame_tx, frames) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = FrameReader::new(std::io::BufReader::new(stdout));
            loop {
                let next = match reader.read_frame() {
                    Ok(Some(f)) => Ok(f),
                    Ok(None) => Err(WireError::Eof),
                    Err(e) => Err(e),
                };
                let stop = next.is_err();
                if frame_tx.send(next).is_err() || stop {
                    break;
                }
            }
        });

        let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
        thread::spawn(move || {
            let mut stdin = stdin;
            for bytes in req_rx {
                if stdin.write_all(&bytes).and_then(|_| stdin.flush()).is_err() {
                    break;
                }
            }
        });

        Ok(Self { child, requests: Some(req_tx), frames, dead: None })
    }

    fn exit_status(&mut self) -> String {
        let deadline = Instant::now() + Duration::from_millis(200);
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return format!("process {status}"),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                Ok(None) => return "process closed its output".into(),
                Err(e) => return e.to_string(),
            }
        }
    }

    fn mark_dead(&mut self, reason: String) -> BackendError {
        self.dead = Some(reason.clone());
        self.requests = None;
        self.kill();
        BackendError::Dead(reason)
    }

    fn kill(&mut self) {
        #[cfg(unix)]
        if let Ok(pid) = i32::try_from(self.child.id()) {
            // SAFETY: plain signal delivery to the group created at spawn.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn recv(&self, deadline: Option<Instant>) -> Result<Result<Frame, WireError>, RecvTimeoutError> {
        match deadline {
            Some(d) => self.frames.recv_timeout(d.saturating_duration_since(Instant::now())),
            None => self.frames.recv().map_err(|_| RecvTimeoutError::Disconnected),
        }
    }

    fn call(&mut self, tile: &RgbImage, timeout: Option<Duration>) -> Result<Logits, BackendError> {
        if let Some(reason) = &self.dead {
            return Err(BackendError::Dead(reason.clone()));
        }
        let bytes = wire::encode(&Frame::request(tile));
        if self.requests.as_ref().is_none_or(|tx| tx.send(bytes).is_err()) {
            let status = self.exit_status();
            return Err(self.mark_dead(status));
        }
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            match self.recv(deadline) {
                Ok(Ok(Frame::Hello { .. })) => continue,
                Ok(Ok(Frame::Response(l))) => {
                    check_output(&l, tile.width(), tile.height())?;
                    return Ok(l);
                }
                Ok(Ok(Frame::Error(msg))) => return Err(BackendError::Remote(msg)),
                Ok(Ok(Frame::Request { .. })) => {
                    self.mark_dead("sent a request frame".into());
                    return Err(WireError::UnexpectedFrame { offset: 0, kind: "request" }.into());
                }
                Ok(Err(WireError::Eof)) | Err(RecvTimeoutError::Disconnected) => {
                    let status = self.exit_status();
                    return Err(self.mark_dead(format!("{status} before answering")));
                }
                Ok(Err(e)) => {
                    // The stream cannot be resynchronized after a framing error.
                    self.mark_dead(format!("protocol error: {e}"));
                    return Err(e.into());
                }
                Err(RecvTimeoutError::Timeout) => {
                    let ms = timeout.map_or(0, |t| t.as_millis() as u64);
                    self.mark_dead(format!("timed out after {ms} ms"));
                    return Err(BackendError::Timeout(ms));
                }
            }
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved child exit on its own.
        self.requests = None;
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        self.kill();
    }
}

pub struct ExternalBackend {
    config: ExternalConfig,
    workers: Vec<Mutex<Worker>>,
    concurrent: bool,
    next: AtomicUsize,
}

impl ExternalBackend {
    /// Starts the process and waits briefly for a handshake.
    pub fn spawn(config: ExternalConfig) -> Result<Self, BackendError> {
        let mut first = Worker::spawn(&config.command)?;
        let mut concurrent = false;
        match first.frames.recv_timeout(config.handshake_wait) {
            Ok(Ok(Frame::Hello { flags })) => concurrent = flags & FLAG_CONCURRENT != 0,
            Ok(Ok(other)) => {
                return Err(WireError::UnexpectedFrame { offset: 0, kind: other.kind() }.into());
            }
            Ok(Err(WireError::Eof)) | Err(RecvTimeoutError::Disconnected) => {
                let status = first.exit_status();
                return Err(BackendError::Dead(format!("{status} during start-up")));
            }
            Ok(Err(e)) => return Err(e.into()),
            Err(RecvTimeoutError::Timeout) => debug!("no handshake from `{}`; serializing calls", config.command),
        }
        let mut workers = vec![Mutex::new(first)];
        if concurrent {
            for _ in 1..config.max_workers.max(1) {
                workers.push(Mutex::new(Worker::spawn(&config.command)?));
            }
        }
        Ok(Self { config, workers, concurrent, next: AtomicUsize::new(0) })
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }
}

impl SegmentationBackend for ExternalBackend {
    fn evaluate(&self, tile: &RgbImage, _ctx: &TileContext) -> Result<Logits, BackendError> {
        let n = self.workers.len();
        let start = self.next.fetch_add(1, Ordering::Relaxed) % n;
        // Prefer an idle process; otherwise queue on the round-robin pick.
        let mut guard = (0..n).find_map(|i| self.workers[(start + i) % n].try_lock().ok());
        let mut worker = match guard.take() {
            Some(g) => g,
            None => self.workers[start].lock().unwrap_or_else(|p| p.into_inner()),
        };
        let result = worker.call(tile, self.config.timeout);
        if let Err(e) = &result {
            warn!("external backend: {e}");
        }
        result
    }

    fn concurrent_safe(&self) -> bool {
        self.concurrent
    }
}
