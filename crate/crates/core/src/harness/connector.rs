//! Connector wire protocol and transports.
//!
//! One turn is one request/reply pair. Requests and replies are single-line
//! UTF-8 JSON documents; the subprocess transport exchanges them over the
//! agent's standard streams, the HTTP transport POSTs one request per turn.
//!
//! Request: `{"case_id", "task_index", "turn", "env_info", "tools": [...],
//! "messages": [...]}`. Reply: `{"tool_calls": [{"name", "arguments"}, ...]}`
//! XOR `{"text": "..."}`.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Observation, ToolCall, ToolSpec};

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("connector timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("connector io: {0}")]
    Io(#[from] io::Error),
}

/// Message roles in the assembled dialogue context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "user")]
    User,
    #[serde(rename = "assistant")]
    Assistant,
    #[serde(rename = "tool")]
    ToolResult,
}

/// Payload of one context message.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Text(String),
    ToolCalls(Vec<ToolCall>),
    Observations(Vec<Observation>),
}

/// One entry of the dialogue history sent to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMessage", into = "RawMessage")]
pub struct ContextMessage {
    pub role: Role,
    pub body: MessageBody,
}

impl ContextMessage {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            body: MessageBody::Text(text.into()),
        }
    }

    pub fn assistant_text(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            body: MessageBody::Text(text.into()),
        }
    }

    pub fn assistant_calls(calls: Vec<ToolCall>) -> Self {
        Self {
            role: Role::Assistant,
            body: MessageBody::ToolCalls(calls),
        }
    }

    pub fn tool_results(observations: Vec<Observation>) -> Self {
        Self {
            role: Role::ToolResult,
            body: MessageBody::Observations(observations),
        }
    }

    /// Text the agent could read facts from: user text, summaries and
    /// observation documents. Tool-call argument payloads are excluded.
    pub fn readable_text(&self) -> Option<String> {
        match &self.body {
            MessageBody::Text(text) => Some(text.clone()),
            MessageBody::Observations(observations) => Some(
                observations
                    .iter()
                    .map(|o| serde_json::to_string(o).expect("observation serializes"))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            MessageBody::ToolCalls(_) => None,
        }
    }
}

/// Tool call as it appears on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireCall {
    pub name: String,
    pub arguments: Value,
}

impl From<ToolCall> for WireCall {
    fn from(call: ToolCall) -> Self {
        WireCall {
            name: call.tool,
            arguments: call.arguments,
        }
    }
}

impl TryFrom<WireCall> for ToolCall {
    type Error = crate::model::ModelError;

    fn try_from(wire: WireCall) -> Result<Self, Self::Error> {
        ToolCall::new(wire.name, wire.arguments)
    }
}

#[derive(Serialize, Deserialize)]
struct RawMessage {
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tool_calls: Option<Vec<WireCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observations: Option<Vec<Observation>>,
}

impl From<ContextMessage> for RawMessage {
    fn from(message: ContextMessage) -> Self {
        let mut raw = RawMessage {
            role: message.role,
            content: None,
            tool_calls: None,
            observations: None,
        };
        match message.body {
            MessageBody::Text(text) => raw.content = Some(text),
            MessageBody::ToolCalls(calls) => {
                raw.tool_calls = Some(calls.into_iter().map(WireCall::from).collect())
            }
            MessageBody::Observations(observations) => raw.observations = Some(observations),
        }
        raw
    }
}

impl TryFrom<RawMessage> for ContextMessage {
    type Error = String;

    fn try_from(raw: RawMessage) -> Result<Self, Self::Error> {
        let body = match (raw.content, raw.tool_calls, raw.observations) {
            (Some(text), None, None) => MessageBody::Text(text),
            (None, Some(calls), None) => MessageBody::ToolCalls(
                calls
                    .into_iter()
                    .map(ToolCall::try_from)
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?,
            ),
            (None, None, Some(observations)) => MessageBody::Observations(observations),
            _ => return Err("message must carry exactly one of content/tool_calls/observations".into()),
        };
        Ok(ContextMessage { role: raw.role, body })
    }
}

/// One evaluation turn sent to the agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurnRequest {
    pub case_id: String,
    pub task_index: usize,
    pub turn: usize,
    pub env_info: String,
    pub tools: Vec<ToolSpec>,
    pub messages: Vec<ContextMessage>,
}

/// The agent's reply: a parallel call group or a text answer, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReply", into = "RawReply")]
pub enum TurnReply {
    ToolCalls(Vec<ToolCall>),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct RawReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tool_calls: Option<Vec<WireCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

impl From<TurnReply> for RawReply {
    fn from(reply: TurnReply) -> Self {
        match reply {
            TurnReply::ToolCalls(calls) => RawReply {
                tool_calls: Some(calls.into_iter().map(WireCall::from).collect()),
                text: None,
            },
            TurnReply::Text(text) => RawReply {
                tool_calls: None,
                text: Some(text),
            },
        }
    }
}

impl TryFrom<RawReply> for TurnReply {
    type Error = String;

    fn try_from(raw: RawReply) -> Result<Self, Self::Error> {
        match (raw.tool_calls, raw.text) {
            (Some(calls), None) => {
                if calls.is_empty() {
                    return Err("tool_calls must be non-empty".into());
                }
                Ok(TurnReply::ToolCalls(
                    calls
                        .into_iter()
                        .map(ToolCall::try_from)
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?,
                ))
            }
            (None, Some(text)) => Ok(TurnReply::Text(text)),
            _ => Err("reply must carry exactly one of tool_calls or text".into()),
        }
    }
}

/// Anything able to answer evaluation turns.
pub trait Connector: Send {
    fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError>;
}

/// Parses one reply line.
pub fn parse_reply(line: &str) -> Result<TurnReply, ConnectorError> {
    serde_json::from_str::<TurnReply>(line)
        .map_err(|e| ConnectorError::Protocol(format!("malformed reply: {e}")))
}

/// Agent subprocess speaking one JSON document per line on stdin/stdout.
pub struct SubprocessConnector {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<io::Result<String>>,
    timeout: Duration,
    /// Set after a timeout: a late reply would desynchronize the stream, so
    /// the session refuses further exchanges.
    poisoned: bool,
}

impl SubprocessConnector {
    /// Spawns `argv[0]` with the remaining arguments. The reader thread
    /// detaches when the child's stdout closes.
    pub fn spawn(argv: &[String], timeout: Duration) -> io::Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| io::Error::other("empty connector command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (sender, lines) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if sender.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(err) => {
                        let _ = sender.send(Err(err));
                        break;
                    }
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
            timeout,
            poisoned: false,
        })
    }
}

impl Connector for SubprocessConnector {
    fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
        if self.poisoned {
            return Err(ConnectorError::Protocol(
                "session desynchronized by an earlier timeout".into(),
            ));
        }
        let line = serde_json::to_string(request).expect("request serializes");
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.write_all(b"\n")?;
        self.stdin.flush()?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => parse_reply(line.trim_end()),
            Ok(Err(err)) => Err(ConnectorError::Io(err)),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.poisoned = true;
                Err(ConnectorError::Timeout(self.timeout))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(ConnectorError::Protocol(
                "connector closed its output stream".into(),
            )),
        }
    }
}

impl Drop for SubprocessConnector {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Minimal HTTP/1.1 transport: POSTs one request per turn to an `http://`
/// endpoint and expects a Content-Length JSON reply. Local agent shims do
/// not need TLS or chunked framing, so neither is supported.
pub struct HttpConnector {
    host: String,
    port: u16,
    path: String,
    timeout: Duration,
}

impl HttpConnector {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, ConnectorError> {
        let rest = url
            .strip_prefix("http://")
            .ok_or_else(|| ConnectorError::Protocol(format!("unsupported endpoint `{url}`, expected http://")))?;
        let (authority, path) = match rest.find('/') {
            Some(slash) => (&rest[..slash], rest[slash..].to_string()),
            None => (rest, "/".to_string()),
        };
        let (host, port) = match authority.rsplit_once(':') {
            Some((host, port)) => (
                host.to_string(),
                port.parse::<u16>()
                    .map_err(|_| ConnectorError::Protocol(format!("bad port in `{url}`")))?,
            ),
            None => (authority.to_string(), 80),
        };
        Ok(Self {
            host,
            port,
            path,
            timeout,
        })
    }
}

impl Connector for HttpConnector {
    fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
        let body = serde_json::to_string(request).expect("request serializes");
        let mut stream = TcpStream::connect((self.host.as_str(), self.port))?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        write!(
            stream,
            "POST {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            self.path,
            self.host,
            body.len(),
            body
        )?;
        stream.flush()?;

        let mut reader = BufReader::new(stream);
        let mut status_line = String::new();
        reader.read_line(&mut status_line).map_err(map_timeout(self.timeout))?;
        let status = status_line
            .split_whitespace()
            .nth(1)
            .and_then(|code| code.parse::<u16>().ok())
            .ok_or_else(|| ConnectorError::Protocol(format!("bad status line `{}`", status_line.trim())))?;
        let mut content_length: Option<usize> = None;
        loop {
            let mut header = String::new();
            reader.read_line(&mut header).map_err(map_timeout(self.timeout))?;
            let header = header.trim_end();
            if header.is_empty() {
                break;
            }
            if let Some((name, value)) = header.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    content_length = value.trim().parse::<usize>().ok();
                }
            }
        }
        let mut body = match content_length {
            Some(len) => {
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).map_err(map_timeout(self.timeout))?;
                buf
            }
            None => {
                let mut buf = Vec::new();
                reader.read_to_end(&mut buf).map_err(map_timeout(self.timeout))?;
                buf
            }
        };
        if status != 200 {
            return Err(ConnectorError::Protocol(format!(
                "endpoint returned status {status}"
            )));
        }
        if body.last() == Some(&b'\n') {
            body.pop();
        }
        let text = String::from_utf8(body)
            .map_err(|_| ConnectorError::Protocol("reply is not UTF-8".into()))?;
        parse_reply(text.trim())
    }
}

fn map_timeout(timeout: Duration) -> impl Fn(io::Error) -> ConnectorError {
    move |err| {
        if matches!(err.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) {
            ConnectorError::Timeout(timeout)
        } else {
            ConnectorError::Io(err)
        }
    }
}
