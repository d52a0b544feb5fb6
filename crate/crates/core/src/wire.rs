//! Binary message framing. All integers are big-endian.
//!
//! ```text
//! msg                := type:u8 | epoch:u32 | member_id_len:u8 | member_id | payload
//! PublicShare        := x_len:u16 | x | y_len:u16 | y
//! EncryptedShare     := nonce[12] | ct_len:u16 | ciphertext || tag
//! HarnToken          := e_len:u16 | e
//! RotatedShare       := same layout as EncryptedShare
//! ```

use thiserror::Error;

use crate::ec::{CurveParams, CurvePoint};
use crate::field::{FieldElement, FieldError, Prime};
use crate::sss::MemberId;

pub const NONCE_LEN: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("member id must be 1..=255 bytes of UTF-8")]
    BadMemberId,
    #[error("field too long for a u16 length prefix: {0} bytes")]
    TooLong(usize),
    #[error("point at infinity has no wire encoding")]
    Infinity,
    #[error("decoded point is not on the curve")]
    NotOnCurve,
    #[error("expected message type {expected:?}, got {got:?}")]
    WrongType {
        expected: MessageType,
        got: MessageType,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, WireError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    PublicShare = 0x01,
    EncryptedShare = 0x02,
    HarnToken = 0x03,
    RotatedShare = 0x04,
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(byte: u8) -> Result<Self> {
        match byte {
            0x01 => Ok(MessageType::PublicShare),
            0x02 => Ok(MessageType::EncryptedShare),
            0x03 => Ok(MessageType::HarnToken),
            0x04 => Ok(MessageType::RotatedShare),
            other => Err(WireError::UnknownType(other)),
        }
    }
}

/// One framed message. The payload is opaque at this layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageType,
    pub epoch: u32,
    pub member_id: MemberId,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MessageType, epoch: u32, member_id: MemberId, payload: Vec<u8>) -> Self {
        Frame {
            kind,
            epoch,
            member_id,
            payload,
        }
    }

    pub fn encoded_len(&self) -> usize {
        1 + 4 + 1 + self.member_id.as_bytes().len() + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let id = self.member_id.as_bytes();
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.push(id.len() as u8);
        out.extend_from_slice(id);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let kind = MessageType::try_from(r.u8()?)?;
        let epoch = u32::from_be_bytes(r.take(4)?.try_into().expect("4 bytes"));
        let id_len = r.u8()? as usize;
        if id_len == 0 {
            return Err(WireError::BadMemberId);
        }
        let id = std::str::from_utf8(r.take(id_len)?).map_err(|_| WireError::BadMemberId)?;
        let member_id = MemberId::new(id).map_err(|_| WireError::BadMemberId)?;
        Ok(Frame {
            kind,
            epoch,
            member_id,
            payload: r.rest().to_vec(),
        })
    }

    pub fn expect(&self, kind: MessageType) -> Result<&[u8]> {
        if self.kind != kind {
            return Err(WireError::WrongType {
                expected: kind,
                got: self.kind,
            });
        }
        Ok(&self.payload)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(WireError::Truncated {
                needed: n - available,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn prefixed(&mut self) -> Result<&'a [u8]> {
        let len = self.u16()? as usize;
        self.take(len)
    }

    fn rest(&mut self) -> &'a [u8] {
        let slice = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        slice
    }

    fn finish(&self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(WireError::Trailing(n)),
        }
    }
}

fn put_prefixed(out: &mut Vec<u8>, bytes: &[u8]) -> Result<()> {
    let len = u16::try_from(bytes.len()).map_err(|_| WireError::TooLong(bytes.len()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

/// Affine coordinates, each at the fixed width of the curve's base field.
pub fn encode_point(point: &CurvePoint) -> Result<Vec<u8>> {
    let (x, y) = match point {
        CurvePoint::Infinity => return Err(WireError::Infinity),
        CurvePoint::Affine { x, y } => (x.to_bytes_be(), y.to_bytes_be()),
    };
    let mut out = Vec::with_capacity(4 + x.len() + y.len());
    put_prefixed(&mut out, &x)?;
    put_prefixed(&mut out, &y)?;
    Ok(out)
}

/// Rejects non-canonical widths and points off the curve.
pub fn decode_point(payload: &[u8], curve: &CurveParams) -> Result<CurvePoint> {
    let mut r = Reader::new(payload);
    let x = FieldElement::from_bytes_be(r.prefixed()?, curve.modulus())?;
    let y = FieldElement::from_bytes_be(r.prefixed()?, curve.modulus())?;
    r.finish()?;
    let point = CurvePoint::affine(x, y);
    if !curve.is_on_curve(&point) {
        return Err(WireError::NotOnCurve);
    }
    Ok(point)
}

/// Payload bytes of a point frame on `curve`.
pub fn point_payload_len(curve: &CurveParams) -> usize {
    4 + 2 * curve.modulus().byte_len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedPayload {
    pub nonce: [u8; NONCE_LEN],
    /// Ciphertext with the authentication tag appended.
    pub ciphertext: Vec<u8>,
}

impl SealedPayload {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(NONCE_LEN + 2 + self.ciphertext.len());
        out.extend_from_slice(&self.nonce);
        put_prefixed(&mut out, &self.ciphertext)?;
        Ok(out)
    }

    pub fn decode(payload: &[u8]) -> Result<Self> {
        let mut r = Reader::new(payload);
        let nonce = r.take(NONCE_LEN)?.try_into().expect("nonce length");
        let ciphertext = r.prefixed()?.to_vec();
        r.finish()?;
        Ok(SealedPayload { nonce, ciphertext })
    }
}

/// Field element at the fixed width of its modulus.
pub fn encode_scalar(value: &FieldElement) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    put_prefixed(&mut out, &value.to_bytes_be())?;
    Ok(out)
}

pub fn decode_scalar(payload: &[u8], modulus: &Prime) -> Result<FieldElement> {
    let mut r = Reader::new(payload);
    let value = FieldElement::from_bytes_be(r.prefixed()?, modulus)?;
    r.finish()?;
    Ok(value)
}
