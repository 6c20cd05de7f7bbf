//! Length-prefixed little-endian frames: `u32` body length, then a tag byte
//! and the payload. Doubles are IEEE-754 binary64, indices and ranks `u32`,
//! signs `i8`.

use crate::branch::{BBNode, NodeId};
use crate::error::{ProtocolError, SolveError};
use crate::instance::MaxCutProblem;
use crate::linalg::Matrix;

/// A node as shipped between processes: only the fixings, everything else
/// is rebuilt from the root problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub fixed: Vec<(u32, i8)>,
    pub ub: f64,
    pub depth: u32,
    pub id: NodeId,
}

impl NodeRecord {
    pub fn from_node(node: &BBNode) -> Self {
        Self {
            fixed: node.fixed.iter().map(|&(i, s)| (i as u32, s)).collect(),
            ub: node.ub,
            depth: node.depth,
            id: node.id,
        }
    }

    pub fn to_node(&self, root: &MaxCutProblem) -> Result<BBNode, SolveError> {
        let fixed = self.fixed.iter().map(|&(i, s)| (i as usize, s)).collect();
        BBNode::from_fixed(root, fixed, self.ub, self.depth, self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Init { problem: MaxCutProblem, lb: f64, diff: f64 },
    Subproblem(NodeRecord),
    Idle { rank: u32 },
    NewValue { lb: f64, solution: Vec<i8> },
    SendWorkers { rank: u32, count: u32 },
    WorkerList { ranks: Vec<u32>, lb: f64 },
    Finish,
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Init { .. } => 0,
            Message::Subproblem(_) => 1,
            Message::Idle { .. } => 2,
            Message::NewValue { .. } => 3,
            Message::SendWorkers { .. } => 4,
            Message::WorkerList { .. } => 5,
            Message::Finish => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Init { .. } => "init",
            Message::Subproblem(_) => "subproblem",
            Message::Idle { .. } => "idle",
            Message::NewValue { .. } => "new_value",
            Message::SendWorkers { .. } => "send_workers",
            Message::WorkerList { .. } => "worker_list",
            Message::Finish => "finish",
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i8(&mut self, v: i8) {
        self.0.push(v as u8);
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ProtocolError::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn sign(&mut self) -> Result<i8, ProtocolError> {
        match self.u8()? as i8 {
            s @ (1 | -1) => Ok(s),
            s => Err(ProtocolError::Malformed(format!("sign {s}"))),
        }
    }
    /// Length prefix, checked against the bytes left so a corrupt count
    /// cannot trigger a huge allocation.
    fn len(&mut self, item: usize) -> Result<usize, ProtocolError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(item) > self.buf.len() - self.pos {
            return Err(ProtocolError::Malformed(format!("length {n} exceeds payload")));
        }
        Ok(n)
    }
}

/// Encodes a full frame, length prefix included.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut w = Writer(vec![0, 0, 0, 0, msg.tag()]);
    match msg {
        Message::Init { problem, lb, diff } => {
            let n = problem.size();
            w.len(n);
            w.f64(problem.offset());
            w.0.push(u8::from(problem.integral()));
            for i in 0..n {
                for j in 0..n {
                    w.f64(problem.matrix()[(i, j)]);
                }
            }
            w.f64(*lb);
            w.f64(*diff);
        }
        Message::Subproblem(rec) => {
            w.len(rec.fixed.len());
            for &(i, s) in &rec.fixed {
                w.u32(i);
                w.i8(s);
            }
            w.f64(rec.ub);
            w.u32(rec.depth);
            w.u32(rec.id.rank);
            w.u32(rec.id.seq);
        }
        Message::Idle { rank } => w.u32(*rank),
        Message::NewValue { lb, solution } => {
            w.f64(*lb);
            w.len(solution.len());
            for &s in solution {
                w.i8(s);
            }
        }
        Message::SendWorkers { rank, count } => {
            w.u32(*rank);
            w.u32(*count);
        }
        Message::WorkerList { ranks, lb } => {
            w.len(ranks.len());
            for &r in ranks {
                w.u32(r);
            }
            w.f64(*lb);
        }
        Message::Finish => {}
    }
    let body = (w.0.len() - 4) as u32;
    w.0[..4].copy_from_slice(&body.to_le_bytes());
    w.0
}

/// Decodes one full frame; trailing or missing bytes are errors.
pub fn decode(frame: &[u8]) -> Result<Message, ProtocolError> {
    let mut r = Reader { buf: frame, pos: 0 };
    let body = r.u32()? as usize;
    if body != frame.len() - 4 {
        return Err(ProtocolError::Malformed(format!("frame declares {body} bytes, has {}", frame.len() - 4)));
    }
    let msg = match r.u8()? {
        0 => {
            let n = r.u32()? as usize;
            let offset = r.f64()?;
            let integral = match r.u8()? {
                0 => false,
                1 => true,
                v => return Err(ProtocolError::Malformed(format!("flag {v}"))),
            };
            if n.saturating_mul(n).saturating_mul(8) > frame.len() {
                return Err(ProtocolError::Malformed(format!("matrix size {n} exceeds payload")));
            }
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = r.f64()?;
                }
            }
            let problem = MaxCutProblem::new(m, offset, integral).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            Message::Init { problem, lb: r.f64()?, diff: r.f64()? }
        }
        1 => {
            let k = r.len(5)?;
            let mut fixed = Vec::with_capacity(k);
            for _ in 0..k {
                let i = r.u32()?;
                fixed.push((i, r.sign()?));
            }
            let ub = r.f64()?;
            let depth = r.u32()?;
            let id = NodeId { rank: r.u32()?, seq: r.u32()? };
            Message::Subproblem(NodeRecord { fixed, ub, depth, id })
        }
        2 => Message::Idle { rank: r.u32()? },
        3 => {
            let lb = r.f64()?;
            let k = r.len(1)?;
            let solution = (0..k).map(|_| r.sign()).collect::<Result<_, _>>()?;
            Message::NewValue { lb, solution }
        }
        4 => Message::SendWorkers { rank: r.u32()?, count: r.u32()? },
        5 => {
            let k = r.len(4)?;
            let ranks = (0..k).map(|_| r.u32()).collect::<Result<_, _>>()?;
            Message::WorkerList { ranks, lb: r.f64()? }
        }
        6 => Message::Finish,
        t => return Err(ProtocolError::Malformed(format!("unknown tag {t}"))),
    };
    if r.pos != frame.len() {
        return Err(ProtocolError::Malformed("trailing bytes".into()));
    }
    Ok(msg)
}

pub fn encode_subproblem(node: &BBNode) -> Vec<u8> {
    encode(&Message::Subproblem(NodeRecord::from_node(node)))
}

pub fn decode_subproblem(bytes: &[u8], root: &MaxCutProblem) -> Result<BBNode, SolveError> {
    match decode(bytes)? {
        Message::Subproblem(rec) => rec.to_node(root),
        other => Err(ProtocolError::Unexpected { got: other.name().into(), state: "decode_subproblem".into() }.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_maxcut, maxcut_from_graph};
    use crate::io::gen_random_graph;
    use proptest::prelude::*;

    #[test]
    fn root_node_round_trip() {
        let p = maxcut_from_graph(&gen_random_graph(6, 0.7, (-3, 3), 1)).unwrap();
        let root = BBNode::root(&p);
        let bytes = encode_subproblem(&root);
        match decode(&bytes).unwrap() {
            Message::Subproblem(rec) => assert!(rec.fixed.is_empty()),
            m => panic!("{m:?}"),
        }
        assert_eq!(decode_subproblem(&bytes, &p).unwrap().sub, p);
    }

    #[test]
    fn fixed_node_keeps_subtree_optimum() {
        let p = maxcut_from_graph(&gen_random_graph(12, 0.6, (-10, 10), 3)).unwrap();
        let node = BBNode::from_fixed(&p, vec![(3, -1), (7, 1)], 12.5, 2, NodeId { rank: 2, seq: 9 }).unwrap();
        let back = decode_subproblem(&encode_subproblem(&node), &p).unwrap();
        assert_eq!(back, node);
        assert_eq!(brute_force_maxcut(&back.sub).unwrap().value, brute_force_maxcut(&node.sub).unwrap().value);
    }

    #[test]
    fn malformed_frames() {
        let bytes = encode(&Message::SendWorkers { rank: 3, count: 2 });
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err());
        }
        let mut bad = encode(&Message::Finish);
        bad[4] = 99;
        assert!(decode(&bad).is_err());
        let mut huge = encode(&Message::WorkerList { ranks: vec![1], lb: 0.0 });
        huge[5..9].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
        let p = maxcut_from_graph(&gen_random_graph(4, 1.0, (1, 1), 0)).unwrap();
        assert!(decode_subproblem(&encode(&Message::Finish), &p).is_err());
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode(&Message::Idle { rank: 0x0102_0304 });
        assert_eq!(bytes, vec![5, 0, 0, 0, 2, 4, 3, 2, 1]);
    }

    fn sign() -> impl Strategy<Value = i8> {
        prop_oneof![Just(1i8), Just(-1i8)]
    }

    proptest! {
        #[test]
        fn messages_round_trip(
            lb in -1e6f64..1e6,
            ranks in proptest::collection::vec(any::<u32>(), 0..8),
            solution in proptest::collection::vec(sign(), 0..20),
            fixed in proptest::collection::vec((any::<u32>(), sign()), 0..10),
            ub in prop_oneof![Just(f64::INFINITY), -1e6f64..1e6],
            seed in any::<u64>(),
        ) {
            let w = gen_random_graph(5, 0.5, (-5, 5), seed);
            let problem = maxcut_from_graph(&w).unwrap();
            let msgs = vec![
                Message::Init { problem, lb, diff: 0.25 },
                Message::Subproblem(NodeRecord { fixed, ub, depth: 4, id: NodeId { rank: 1, seq: 77 } }),
                Message::Idle { rank: 5 },
                Message::NewValue { lb, solution },
                Message::SendWorkers { rank: 2, count: 3 },
                Message::WorkerList { ranks, lb },
                Message::Finish,
            ];
            for m in msgs {
                prop_assert_eq!(decode(&encode(&m)).unwrap(), m);
            }
        }
    }
}
