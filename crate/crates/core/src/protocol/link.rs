use tokio::io::{AsyncReadExt, AsyncWriteExt, ReadHalf, WriteHalf};

use super::codec::{DecodeStats, Decoder, EncodeError};
use super::message::Message;
use crate::transport::Channel;

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("link closed by peer")]
    Closed,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Message-level view of a byte channel.
pub struct FramedLink {
    reader: LinkReader,
    writer: LinkWriter,
}

pub struct LinkReader {
    half: ReadHalf<Channel>,
    decoder: Decoder,
    buf: Box<[u8]>,
}

pub struct LinkWriter {
    half: WriteHalf<Channel>,
    scratch: Vec<u8>,
}

impl FramedLink {
    pub fn new(channel: Channel) -> Self {
        let (r, w) = tokio::io::split(channel);
        Self {
            reader: LinkReader {
                half: r,
                decoder: Decoder::new(),
                buf: vec![0u8; 16 * 1024].into_boxed_slice(),
            },
            writer: LinkWriter {
                half: w,
                scratch: Vec::new(),
            },
        }
    }

    pub async fn send(&mut self, msg: &Message) -> Result<(), LinkError> {
        self.writer.send(msg).await
    }

    /// Next message. Cancel-safe.
    pub async fn recv(&mut self) -> Result<Message, LinkError> {
        self.reader.recv().await
    }

    pub fn split(self) -> (LinkReader, LinkWriter) {
        (self.reader, self.writer)
    }

    pub fn reader(&mut self) -> &mut LinkReader {
        &mut self.reader
    }

    pub fn writer(&mut self) -> &mut LinkWriter {
        &mut self.writer
    }
}

impl LinkReader {
    pub async fn recv(&mut self) -> Result<Message, LinkError> {
        loop {
            if let Some(m) = self.decoder.next_message() {
                return Ok(m);
            }
            let n = self.half.read(&mut self.buf).await?;
            if n == 0 {
                return Err(LinkError::Closed);
            }
            self.decoder.push(&self.buf[..n]);
        }
    }

    pub fn stats(&self) -> DecodeStats {
        self.decoder.stats()
    }
}

impl LinkWriter {
    pub async fn send(&mut self, msg: &Message) -> Result<(), LinkError> {
        self.scratch.clear();
        super::codec::encode_into(msg, &mut self.scratch)?;
        self.half.write_all(&self.scratch).await?;
        self.half.flush().await?;
        Ok(())
    }

    /// Writes pre-encoded bytes as they are.
    pub async fn send_raw(&mut self, bytes: &[u8]) -> Result<(), LinkError> {
        self.half.write_all(bytes).await?;
        self.half.flush().await?;
        Ok(())
    }

    pub async fn shutdown(&mut self) -> Result<(), LinkError> {
        self.half.shutdown().await?;
        Ok(())
    }
}
