use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use tracing::{debug, warn};

use super::{BackendError, Route, Transport};

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    /// Replies still owed for requests that timed out on our side.
    stale: usize,
}

impl Session {
    fn spawn(argv: &[String]) -> Result<Session, BackendError> {
        let (prog, args) = argv
            .split_first()
            .ok_or_else(|| BackendError::Transport("empty command line".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Transport(format!("spawning {prog}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
            stale: 0,
        })
    }

    fn recv(&self, timeout: Duration) -> Result<String, BackendError> {
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(BackendError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(BackendError::SessionLost("process closed its output".into()))
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Line-delimited JSON over a child process's stdin/stdout. Requests are
/// serialized: one in flight per session.
pub struct SubprocessTransport {
    argv: Vec<String>,
    grace: Duration,
    session: Mutex<Option<Session>>,
}

impl SubprocessTransport {
    pub fn spawn(argv: Vec<String>, grace: Duration) -> Result<Self, BackendError> {
        let session = Session::spawn(&argv)?;
        Ok(SubprocessTransport {
            argv,
            grace,
            session: Mutex::new(Some(session)),
        })
    }

    /// Splits a shell-style command line.
    pub fn from_command_line(cmd: &str, grace: Duration) -> Result<Self, BackendError> {
        let argv = shlex::split(cmd)
            .ok_or_else(|| BackendError::Transport(format!("cannot parse command line {cmd:?}")))?;
        Self::spawn(argv, grace)
    }
}

impl Transport for SubprocessTransport {
    fn call(
        &self,
        _route: Route,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, BackendError> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let session = guard
            .as_mut()
            .ok_or_else(|| BackendError::SessionLost("session was not restarted".into()))?;

        while session.stale > 0 {
            match session.recv(self.grace) {
                Ok(_) => session.stale -= 1,
                Err(e) => {
                    warn!("dropping wedged session: {e}");
                    *guard = None;
                    return Err(BackendError::SessionLost("stale reply never arrived".into()));
                }
            }
        }

        let mut line = serde_json::to_string(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        line.push('\n');
        if let Err(e) = session.stdin.write_all(line.as_bytes()).and_then(|_| session.stdin.flush()) {
            *guard = None;
            return Err(BackendError::SessionLost(format!("write failed: {e}")));
        }
        match session.recv(timeout) {
            Ok(reply) => {
                debug!(%reply, "subprocess reply");
                serde_json::from_str(&reply).map_err(|e| BackendError::Malformed(format!("{e}: {reply}")))
            }
            Err(BackendError::Timeout(t)) => {
                session.stale += 1;
                Err(BackendError::Timeout(t))
            }
            Err(e) => {
                *guard = None;
                Err(e)
            }
        }
    }

    fn restart(&self) -> Result<(), BackendError> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        *guard = None;
        *guard = Some(Session::spawn(&self.argv)?);
        Ok(())
    }
}
