//! Platform-membership check: the answer to a challenge is the challenge
//! with its bytes in reverse order.

use rand::RngCore;

use super::message::CHALLENGE_MAX;

pub const CHALLENGE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum HandshakeError {
    #[error("empty challenge")]
    EmptyChallenge,
    #[error("challenge of {0} bytes exceeds {CHALLENGE_MAX}")]
    ChallengeTooLong(usize),
}

pub fn handshake_answer(challenge: &[u8]) -> Result<Vec<u8>, HandshakeError> {
    if challenge.is_empty() {
        return Err(HandshakeError::EmptyChallenge);
    }
    if challenge.len() > CHALLENGE_MAX {
        return Err(HandshakeError::ChallengeTooLong(challenge.len()));
    }
    Ok(challenge.iter().rev().copied().collect())
}

pub fn verify_handshake(challenge: &[u8], answer: &[u8]) -> bool {
    handshake_answer(challenge).is_ok_and(|expected| expected == answer)
}

/// Fresh random challenge of [`CHALLENGE_LEN`] bytes.
pub fn new_challenge() -> Vec<u8> {
    let mut c = vec![0u8; CHALLENGE_LEN];
    rand::rng().fill_bytes(&mut c);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal() {
        assert_eq!(handshake_answer(&[1, 2, 3]).unwrap(), vec![3, 2, 1]);
        assert_eq!(handshake_answer(&[0xAA]).unwrap(), vec![0xAA]);
        assert_eq!(handshake_answer(&[]), Err(HandshakeError::EmptyChallenge));
        assert!(handshake_answer(&[0; 65]).is_err());
    }

    #[test]
    fn verification() {
        let c = [1u8, 2, 3, 4];
        assert!(verify_handshake(&c, &[4, 3, 2, 1]));
        assert!(!verify_handshake(&c, &c));
        assert!(!verify_handshake(&c, &[]));
        assert!(!verify_handshake(&c, &[4, 3, 2]));
        assert!(!verify_handshake(&[], &[]));
    }

    #[test]
    fn challenges_differ() {
        let a = new_challenge();
        assert_eq!(a.len(), CHALLENGE_LEN);
        assert_ne!(a, new_challenge());
    }
}
