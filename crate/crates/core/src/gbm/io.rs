//! Binary model file.
//!
//! ```text
//! magic       4 bytes  "EYDS"
//! version     u16
//! total_len   u32      length of the whole file including the checksum
//! n_features  u16
//! max_depth   u16
//! n_trees     u32
//! lr          f64
//! base_score  f64
//! threshold   f64
//! trees       per tree: node_count u16, then nodes in pre-order:
//!               0x00 value f64            (leaf)
//!               0x01 feature u8, thr f64  (split; left subtree follows, then right)
//! crc32       u32      over every preceding byte
//! ```
//!
//! All numerics are little-endian.

use super::{GbmModel, Node, Tree};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EYDS";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 + 2 + 4 + 8 * 3;
const MAX_DEPTH_LIMIT: usize = 32;

const TAG_LEAF: u8 = 0;
const TAG_SPLIT: u8 = 1;

pub(super) fn encode(model: &GbmModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + model.trees.len() * 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(model.n_features as u16).to_le_bytes());
    out.extend_from_slice(&(model.max_depth as u16).to_le_bytes());
    out.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    out.extend_from_slice(&model.learning_rate.to_le_bytes());
    out.extend_from_slice(&model.base_score.to_le_bytes());
    out.extend_from_slice(&model.threshold.to_le_bytes());
    for tree in &model.trees {
        out.extend_from_slice(&(tree.nodes.len() as u16).to_le_bytes());
        encode_subtree(&tree.nodes, 0, &mut out);
    }
    let total = (out.len() + 4) as u32;
    out[6..10].copy_from_slice(&total.to_le_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn encode_subtree(nodes: &[Node], i: usize, out: &mut Vec<u8>) {
    match nodes[i] {
        Node::Leaf { value } => {
            out.push(TAG_LEAF);
            out.extend_from_slice(&value.to_le_bytes());
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push(TAG_SPLIT);
            out.push(feature as u8);
            out.extend_from_slice(&threshold.to_le_bytes());
            encode_subtree(nodes, left, out);
            encode_subtree(nodes, right, out);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos.checked_add(N).ok_or(Error::Truncated)?;
        let bytes = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length is N"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<GbmModel> {
    if bytes.len() < 10 {
        return Err(Error::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::MalformedModel("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let total = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    if bytes.len() < total {
        return Err(Error::Truncated);
    }
    if total < HEADER_LEN + 4 || bytes.len() != total {
        return Err(Error::MalformedModel(format!(
            "declared length {total}, payload {} bytes",
            bytes.len()
        )));
    }
    let body = &bytes[..total - 4];
    let stored = u32::from_le_bytes(bytes[total - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 10 };
    let n_features = r.u16()? as usize;
    let max_depth = r.u16()? as usize;
    let n_trees = r.u32()? as usize;
    let learning_rate = r.f64()?;
    let base_score = r.f64()?;
    let threshold = r.f64()?;
    if max_depth > MAX_DEPTH_LIMIT {
        return Err(Error::MalformedModel(format!("max_depth {max_depth}")));
    }
    let mut trees = Vec::with_capacity(n_trees.min(4096));
    for _ in 0..n_trees {
        let count = r.u16()? as usize;
        let mut nodes = Vec::with_capacity(count);
        decode_subtree(&mut r, &mut nodes, 0, max_depth)?;
        if nodes.len() != count {
            return Err(Error::MalformedModel(format!(
                "tree declares {count} nodes, decoded {}",
                nodes.len()
            )));
        }
        trees.push(Tree::from_nodes(nodes).ok_or_else(|| Error::MalformedModel("inconsistent tree links".into()))?);
    }
    if r.pos != body.len() {
        return Err(Error::MalformedModel("trailing bytes after trees".into()));
    }
    let model = GbmModel {
        n_features,
        learning_rate,
        base_score,
        max_depth,
        threshold,
        trees,
    };
    model.check_invariants()?;
    Ok(model)
}

fn decode_subtree(r: &mut Reader<'_>, nodes: &mut Vec<Node>, depth: usize, max_depth: usize) -> Result<usize> {
    let id = nodes.len();
    match r.u8()? {
        TAG_LEAF => {
            nodes.push(Node::Leaf { value: r.f64()? });
        }
        TAG_SPLIT => {
            if depth >= max_depth {
                return Err(Error::MalformedModel("tree exceeds max_depth".into()));
            }
            let feature = r.u8()? as usize;
            let threshold = r.f64()?;
            nodes.push(Node::Leaf { value: 0.0 });
            let left = decode_subtree(r, nodes, depth + 1, max_depth)?;
            let right = decode_subtree(r, nodes, depth + 1, max_depth)?;
            nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        tag => return Err(Error::MalformedModel(format!("unknown node tag {tag}"))),
    }
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::super::{fit, FitParams};
    use super::*;

    fn model() -> GbmModel {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 10) as f64, (i * 3 % 7) as f64, i as f64 / 50.0, 0.5])
            .collect();
        let labels: Vec<bool> = (0..50).map(|i| (i % 10) > 4 || i % 7 == 0).collect();
        fit(&rows, &labels, &FitParams::new(8, 3))
            .unwrap()
            .with_threshold(0.42)
            .unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let m = model();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"EYDS");
        assert_eq!(GbmModel::from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let mut bytes = model().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(GbmModel::from_bytes(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = model().to_bytes();
        for cut in [0, 3, 9, 20, bytes.len() - 1] {
            assert!(matches!(GbmModel::from_bytes(&bytes[..cut]), Err(Error::Truncated)));
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = model().to_bytes();
        bytes[4] = 9;
        assert!(matches!(GbmModel::from_bytes(&bytes), Err(Error::VersionMismatch(9))));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = model().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(GbmModel::from_bytes(&bytes), Err(Error::MalformedModel(_))));
    }
}
