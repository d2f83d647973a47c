//! Adapter for language models served by another process.
//!
//! Wire format: one JSON object per line over TCP. The client opens with
//!
//! ```text
//! {"op":"hello","direction":"reverse","vocab_hash":"…","vocab_size":812}
//! ```
//!
//! and the server answers with its own `hello`. Each request is
//! `{"op":"next","context":[0,17,…]}`; the reply is one of
//!
//! ```text
//! {"op":"dist","probs":[…]}                            full vector, length |V|
//! {"op":"top","entries":[[id,logprob],…],"remainder":r} remainder spread evenly over the ids not listed
//! {"op":"error","message":"…"}
//! ```
//!
//! Replies are validated on receipt: every probability finite and positive,
//! total within 1e-6 of one (then renormalized exactly).

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError};
use crate::corpus::{Direction, TokenId, Vocabulary};

const SUM_TOLERANCE: f64 = 1e-6;
const IO_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Message {
    Hello {
        direction: Direction,
        vocab_hash: String,
        vocab_size: usize,
    },
    Next {
        context: Vec<TokenId>,
    },
    Dist {
        probs: Vec<f64>,
    },
    Top {
        entries: Vec<(TokenId, f64)>,
        remainder: f64,
    },
    Error {
        message: String,
    },
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Connection {
    fn send(&mut self, msg: &Message) -> Result<(), LmError> {
        let mut line = serde_json::to_string(msg).map_err(|e| LmError::Protocol(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, LmError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(LmError::Protocol("connection closed by server".into()));
        }
        serde_json::from_str(&line).map_err(|e| LmError::Protocol(format!("malformed reply: {e}")))
    }
}

/// A remote model behind the line-delimited JSON protocol. Requests on one
/// client are serialized; open several clients for parallel use.
pub struct ExternalLm {
    endpoint: String,
    direction: Direction,
    vocab_size: usize,
    vocab_hash: String,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalLm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalLm")
            .field("endpoint", &self.endpoint)
            .field("direction", &self.direction)
            .field("vocab_size", &self.vocab_size)
            .finish()
    }
}

impl ExternalLm {
    pub fn connect(
        endpoint: &str,
        direction: Direction,
        vocab: &Vocabulary,
    ) -> Result<Self, LmError> {
        let connect_err = |source| LmError::Connect {
            endpoint: endpoint.to_string(),
            source,
        };
        let addr = endpoint
            .to_socket_addrs()
            .map_err(connect_err)?
            .next()
            .ok_or_else(|| {
                connect_err(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "address did not resolve",
                ))
            })?;
        let stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT).map_err(connect_err)?;
        stream
            .set_read_timeout(Some(IO_TIMEOUT))
            .map_err(connect_err)?;
        stream.set_nodelay(true).map_err(connect_err)?;
        let mut conn = Connection {
            reader: BufReader::new(stream.try_clone().map_err(connect_err)?),
            writer: stream,
        };
        let local_hash = vocab.hash();
        conn.send(&Message::Hello {
            direction,
            vocab_hash: local_hash.clone(),
            vocab_size: vocab.len(),
        })?;
        match conn.recv()? {
            Message::Hello {
                direction: remote_dir,
                vocab_hash,
                vocab_size,
            } => {
                if remote_dir != direction {
                    return Err(LmError::DirectionMismatch {
                        model: remote_dir,
                        sequence: direction,
                    });
                }
                if vocab_hash != local_hash || vocab_size != vocab.len() {
                    return Err(LmError::VocabularyMismatch {
                        local: local_hash,
                        remote: vocab_hash,
                    });
                }
            }
            Message::Error { message } => {
                return Err(LmError::Protocol(format!("handshake refused: {message}")))
            }
            other => return Err(LmError::Protocol(format!("expected hello, got {other:?}"))),
        }
        debug!("connected to external model at {endpoint}");
        Ok(ExternalLm {
            endpoint: endpoint.to_string(),
            direction,
            vocab_size: vocab.len(),
            vocab_hash: local_hash,
            conn: Mutex::new(conn),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Checks a reply and turns it into an exactly normalized distribution.
pub fn validate_reply(reply: Message, vocab_size: usize) -> Result<Vec<f64>, LmError> {
    let mut probs = match reply {
        Message::Dist { probs } => {
            if probs.len() != vocab_size {
                return Err(LmError::Protocol(format!(
                    "distribution has {} entries, vocabulary has {vocab_size}",
                    probs.len()
                )));
            }
            probs
        }
        Message::Top { entries, remainder } => {
            if !(remainder.is_finite() && remainder >= 0.0) {
                return Err(LmError::Protocol(format!("invalid remainder {remainder}")));
            }
            let mut probs = vec![f64::NAN; vocab_size];
            for &(id, lp) in &entries {
                let slot = probs
                    .get_mut(id as usize)
                    .ok_or_else(|| LmError::Protocol(format!("token {id} outside vocabulary")))?;
                if !slot.is_nan() {
                    return Err(LmError::Protocol(format!("token {id} listed twice")));
                }
                *slot = lp.exp();
            }
            let missing = probs.iter().filter(|p| p.is_nan()).count();
            let fill = if missing > 0 {
                remainder / missing as f64
            } else {
                0.0
            };
            if missing == 0 && remainder > SUM_TOLERANCE {
                return Err(LmError::Protocol(
                    "remainder mass with no unlisted tokens".into(),
                ));
            }
            probs
                .iter_mut()
                .filter(|p| p.is_nan())
                .for_each(|p| *p = fill);
            probs
        }
        Message::Error { message } => {
            return Err(LmError::Protocol(format!("server error: {message}")))
        }
        other => return Err(LmError::Protocol(format!("unexpected reply {other:?}"))),
    };
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p > 0.0))
    {
        return Err(LmError::Protocol(format!(
            "probability of token {i} is {p}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(LmError::Protocol(format!("distribution sums to {total}")));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

impl LanguageModel for ExternalLm {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Vec<f64>, LmError> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        conn.send(&Message::Next {
            context: context.to_vec(),
        })?;
        let reply = conn.recv()?;
        validate_reply(reply, self.vocab_size)
    }
}

/// What a server announces in its handshake.
#[derive(Debug, Clone)]
pub struct ServerInfo {
    pub direction: Direction,
    pub vocab_hash: String,
    pub vocab_size: usize,
}

/// Accepts connections forever, one thread per client, answering `next`
/// requests with `handler`. Returns only if accepting fails.
pub fn serve<F>(listener: TcpListener, info: ServerInfo, handler: F) -> std::io::Result<()>
where
    F: Fn(&[TokenId]) -> Message + Send + Sync + 'static,
{
    let handler = Arc::new(handler);
    let info = Arc::new(info);
    for stream in listener.incoming() {
        let stream = stream?;
        let handler = Arc::clone(&handler);
        let info = Arc::clone(&info);
        std::thread::spawn(move || {
            if let Err(e) = handle_client(stream, &info, handler.as_ref()) {
                warn!("client session ended: {e}");
            }
        });
    }
    Ok(())
}

fn handle_client(
    stream: TcpStream,
    info: &ServerInfo,
    handler: &(dyn Fn(&[TokenId]) -> Message + Send + Sync),
) -> Result<(), LmError> {
    let mut conn = Connection {
        reader: BufReader::new(stream.try_clone()?),
        writer: stream,
    };
    loop {
        let msg = match conn.recv() {
            Ok(m) => m,
            Err(LmError::Protocol(m)) if m.contains("closed") => return Ok(()),
            Err(e) => return Err(e),
        };
        let reply = match msg {
            Message::Hello { .. } => Message::Hello {
                direction: info.direction,
                vocab_hash: info.vocab_hash.clone(),
                vocab_size: info.vocab_size,
            },
            Message::Next { context } => handler(&context),
            other => Message::Error {
                message: format!("unexpected request {other:?}"),
            },
        };
        conn.send(&reply)?;
    }
}

/// Serves a local model over the protocol, sending full distributions.
pub fn serve_model(listener: TcpListener, model: Arc<dyn LanguageModel>) -> std::io::Result<()> {
    let info = ServerInfo {
        direction: model.direction(),
        vocab_hash: model.vocab_hash().to_string(),
        vocab_size: model.vocab_size(),
    };
    serve(listener, info, move |ctx| {
        match model.next_token_dist(ctx) {
            Ok(probs) => Message::Dist { probs },
            Err(e) => Message::Error {
                message: e.to_string(),
            },
        }
    })
}
