//! Point-to-point links between ranks. Every message travels as an encoded
//! frame, so in-process channels and byte streams exercise the same codec.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::sync::Mutex;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender, TryRecvError};

use crate::error::ProtocolError;

use super::wire::{decode, encode, Message};

/// Largest frame body a stream reader accepts.
const MAX_FRAME: usize = 1 << 30;

pub trait Endpoint {
    fn rank(&self) -> usize;
    fn send(&self, to: usize, msg: &Message) -> Result<(), ProtocolError>;
    /// Blocks until a message arrives.
    fn recv(&self) -> Result<(usize, Message), ProtocolError>;
    fn try_recv(&self) -> Result<Option<(usize, Message)>, ProtocolError>;
    fn recv_timeout(&self, timeout: Duration) -> Result<Option<(usize, Message)>, ProtocolError>;
}

type Inbox = Receiver<(usize, Vec<u8>)>;

fn unpack((from, frame): (usize, Vec<u8>)) -> Result<(usize, Message), ProtocolError> {
    Ok((from, decode(&frame)?))
}

fn recv_from(inbox: &Inbox, rank: usize) -> Result<(usize, Message), ProtocolError> {
    inbox.recv().map_err(|_| ProtocolError::Disconnected(rank)).and_then(unpack)
}

fn try_recv_from(inbox: &Inbox, rank: usize) -> Result<Option<(usize, Message)>, ProtocolError> {
    match inbox.try_recv() {
        Ok(item) => unpack(item).map(Some),
        Err(TryRecvError::Empty) => Ok(None),
        Err(TryRecvError::Disconnected) => Err(ProtocolError::Disconnected(rank)),
    }
}

fn recv_timeout_from(inbox: &Inbox, rank: usize, timeout: Duration) -> Result<Option<(usize, Message)>, ProtocolError> {
    match inbox.recv_timeout(timeout) {
        Ok(item) => unpack(item).map(Some),
        Err(RecvTimeoutError::Timeout) => Ok(None),
        Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Disconnected(rank)),
    }
}

/// In-process endpoint backed by unbounded channels.
#[derive(Debug)]
pub struct ChannelEndpoint {
    rank: usize,
    inbox: Inbox,
    peers: Vec<Sender<(usize, Vec<u8>)>>,
}

/// Fully connected set of `size` channel endpoints, indexed by rank.
pub fn channel_mesh(size: usize) -> Vec<ChannelEndpoint> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..size).map(|_| unbounded()).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| ChannelEndpoint { rank, inbox, peers: senders.clone() })
        .collect()
}

impl Endpoint for ChannelEndpoint {
    fn rank(&self) -> usize {
        self.rank
    }

    fn send(&self, to: usize, msg: &Message) -> Result<(), ProtocolError> {
        let peer = self.peers.get(to).ok_or_else(|| ProtocolError::Malformed(format!("no rank {to}")))?;
        peer.send((self.rank, encode(msg))).map_err(|_| ProtocolError::Disconnected(to))
    }

    fn recv(&self) -> Result<(usize, Message), ProtocolError> {
        recv_from(&self.inbox, self.rank)
    }

    fn try_recv(&self) -> Result<Option<(usize, Message)>, ProtocolError> {
        try_recv_from(&self.inbox, self.rank)
    }

    fn recv_timeout(&self, timeout: Duration) -> Result<Option<(usize, Message)>, ProtocolError> {
        recv_timeout_from(&self.inbox, self.rank, timeout)
    }
}

/// A bidirectional byte stream that can be split and shut down.
pub trait Duplex: Read + Write + Send + Sized + 'static {
    fn try_clone_stream(&self) -> io::Result<Self>;
    fn shutdown_stream(&self);
}

impl Duplex for std::net::TcpStream {
    fn try_clone_stream(&self) -> io::Result<Self> {
        self.try_clone()
    }

    fn shutdown_stream(&self) {
        let _ = self.shutdown(std::net::Shutdown::Both);
    }
}

#[cfg(unix)]
impl Duplex for std::os::unix::net::UnixStream {
    fn try_clone_stream(&self) -> io::Result<Self> {
        self.try_clone()
    }

    fn shutdown_stream(&self) {
        let _ = self.shutdown(std::net::Shutdown::Both);
    }
}

fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let body = u32::from_le_bytes(len) as usize;
    if body > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {body} bytes")));
    }
    let mut frame = vec![0u8; 4 + body];
    frame[..4].copy_from_slice(&len);
    r.read_exact(&mut frame[4..])?;
    Ok(Some(frame))
}

/// Endpoint over one byte stream per peer. A reader thread per peer
/// forwards complete frames into a shared inbox.
pub struct StreamEndpoint<S: Duplex> {
    rank: usize,
    inbox: Inbox,
    writers: HashMap<usize, Mutex<S>>,
    readers: Vec<JoinHandle<()>>,
}

impl<S: Duplex> StreamEndpoint<S> {
    pub fn new(rank: usize, links: Vec<(usize, S)>) -> io::Result<Self> {
        let (tx, inbox) = unbounded();
        let mut writers = HashMap::new();
        let mut readers = Vec::new();
        for (peer, stream) in links {
            let mut reader = stream.try_clone_stream()?;
            let tx = tx.clone();
            readers.push(std::thread::spawn(move || loop {
                match read_frame(&mut reader) {
                    Ok(Some(frame)) => {
                        if tx.send((peer, frame)).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        log::warn!("link to rank {peer}: {e}");
                        break;
                    }
                }
            }));
            writers.insert(peer, Mutex::new(stream));
        }
        Ok(Self { rank, inbox, writers, readers })
    }
}

impl<S: Duplex> Drop for StreamEndpoint<S> {
    fn drop(&mut self) {
        for w in self.writers.values() {
            if let Ok(w) = w.lock() {
                w.shutdown_stream();
            }
        }
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
    }
}

impl<S: Duplex> Endpoint for StreamEndpoint<S> {
    fn rank(&self) -> usize {
        self.rank
    }

    fn send(&self, to: usize, msg: &Message) -> Result<(), ProtocolError> {
        let w = self.writers.get(&to).ok_or_else(|| ProtocolError::Malformed(format!("no link to rank {to}")))?;
        let mut w = w.lock().map_err(|_| ProtocolError::Disconnected(to))?;
        w.write_all(&encode(msg)).and_then(|_| w.flush()).map_err(|_| ProtocolError::Disconnected(to))
    }

    fn recv(&self) -> Result<(usize, Message), ProtocolError> {
        recv_from(&self.inbox, self.rank)
    }

    fn try_recv(&self) -> Result<Option<(usize, Message)>, ProtocolError> {
        try_recv_from(&self.inbox, self.rank)
    }

    fn recv_timeout(&self, timeout: Duration) -> Result<Option<(usize, Message)>, ProtocolError> {
        recv_timeout_from(&self.inbox, self.rank, timeout)
    }
}

/// Fully connected mesh of `size` endpoints over Unix socket pairs.
#[cfg(unix)]
pub fn unix_mesh(size: usize) -> io::Result<Vec<StreamEndpoint<std::os::unix::net::UnixStream>>> {
    use std::os::unix::net::UnixStream;
    let mut links: Vec<Vec<(usize, UnixStream)>> = (0..size).map(|_| Vec::new()).collect();
    for a in 0..size {
        for b in (a + 1)..size {
            let (sa, sb) = UnixStream::pair()?;
            links[a].push((b, sa));
            links[b].push((a, sb));
        }
    }
    links.into_iter().enumerate().map(|(rank, l)| StreamEndpoint::new(rank, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exchange<E: Endpoint>(mesh: &[E]) {
        mesh[0].send(2, &Message::Idle { rank: 7 }).unwrap();
        mesh[1].send(2, &Message::Finish).unwrap();
        mesh[0].send(2, &Message::SendWorkers { rank: 1, count: 3 }).unwrap();
        let mut got = Vec::new();
        for _ in 0..3 {
            got.push(mesh[2].recv_timeout(Duration::from_secs(5)).unwrap().unwrap());
        }
        let from0: Vec<_> = got.iter().filter(|(f, _)| *f == 0).map(|(_, m)| m.clone()).collect();
        assert_eq!(from0, vec![Message::Idle { rank: 7 }, Message::SendWorkers { rank: 1, count: 3 }]);
        assert!(got.contains(&(1, Message::Finish)));
        assert!(mesh[2].try_recv().unwrap().is_none());
        assert!(mesh[1].recv_timeout(Duration::from_millis(10)).unwrap().is_none());
    }

    #[test]
    fn channel_mesh_delivers_in_order() {
        let mesh = channel_mesh(3);
        assert_eq!(mesh[1].rank(), 1);
        exchange(&mesh);
        assert!(mesh[0].send(9, &Message::Finish).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn unix_mesh_delivers_in_order() {
        let mesh = unix_mesh(3).unwrap();
        exchange(&mesh);
        assert!(mesh[0].send(0, &Message::Finish).is_err());
    }

    #[test]
    fn stream_reader_rejects_oversized_frames() {
        let mut bytes: &[u8] = &[0xff, 0xff, 0xff, 0xff];
        assert!(read_frame(&mut bytes).is_err());
        let mut empty: &[u8] = &[];
        assert!(read_frame(&mut empty).unwrap().is_none());
    }
}
