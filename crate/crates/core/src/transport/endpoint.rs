use std::fmt;
use std::str::FromStr;

use super::TransportError;

/// Where a node listens or connects.
///
/// Text forms: `host:port` or `tcp://host:port` for TCP, `pipe:<label>` for
/// an in-process pipe.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Tcp { host: String, port: u16 },
    Pipe(String),
}

impl Endpoint {
    pub fn tcp(host: impl Into<String>, port: u16) -> Self {
        Endpoint::Tcp {
            host: host.into(),
            port,
        }
    }

    pub fn pipe(label: impl Into<String>) -> Self {
        Endpoint::Pipe(label.into())
    }

    pub fn is_pipe(&self) -> bool {
        matches!(self, Endpoint::Pipe(_))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp { host, port } if host.contains(':') => write!(f, "[{host}]:{port}"),
            Endpoint::Tcp { host, port } => write!(f, "{host}:{port}"),
            Endpoint::Pipe(label) => write!(f, "pipe:{label}"),
        }
    }
}

impl FromStr for Endpoint {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = |why| TransportError::InvalidEndpoint(s.to_string(), why);
        if let Some(label) = s.strip_prefix("pipe:") {
            if label.is_empty() {
                return Err(invalid("empty pipe label"));
            }
            return Ok(Endpoint::Pipe(label.to_string()));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        let (host, port) = addr
            .rsplit_once(':')
            .ok_or_else(|| invalid("expected host:port"))?;
        let host = host.trim_start_matches('[').trim_end_matches(']');
        if host.is_empty() {
            return Err(invalid("empty host"));
        }
        let port: u16 = port.parse().map_err(|_| invalid("bad port"))?;
        if port == 0 {
            return Err(invalid("port must be in 1..=65535"));
        }
        Ok(Endpoint::Tcp {
            host: host.to_string(),
            port,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(
            "127.0.0.1:7070".parse::<Endpoint>().unwrap(),
            Endpoint::tcp("127.0.0.1", 7070)
        );
        assert_eq!(
            "tcp://localhost:1".parse::<Endpoint>().unwrap(),
            Endpoint::tcp("localhost", 1)
        );
        assert_eq!("pipe:usb0".parse::<Endpoint>().unwrap(), Endpoint::pipe("usb0"));
        assert_eq!("[::1]:80".parse::<Endpoint>().unwrap(), Endpoint::tcp("::1", 80));
        for bad in ["pipe:", "nohost", ":80", "h:70000", "h:x", "h:0"] {
            assert!(bad.parse::<Endpoint>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trip() {
        for e in [
            Endpoint::tcp("::1", 9),
            Endpoint::tcp("a", 1),
            Endpoint::pipe("x"),
        ] {
            assert_eq!(e.to_string().parse::<Endpoint>().unwrap(), e);
        }
    }
}
