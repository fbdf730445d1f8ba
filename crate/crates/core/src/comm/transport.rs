//! Point-to-point messaging and collectives between simulated ranks.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::geometry::ProcessGrid;

use super::frame::{bytes_to_f64s, decode_frame, encode_frame, f64s_to_bytes, FrameHeader, COLLECTIVE_AXIS};
use super::topology::{build_topology, Topology};
use super::CommError;

/// How rank-workers are realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransportKind {
    /// One rank on the calling thread; self-messages go through a local queue.
    Serial,
    /// One thread per rank, exchanging frames over in-process queues.
    Concurrent,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(Self::Serial),
            "concurrent" => Ok(Self::Concurrent),
            other => Err(format!("unknown transport {other:?} (expected serial or concurrent)")),
        }
    }
}

impl std::fmt::Display for TransportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Serial => "serial",
            Self::Concurrent => "concurrent",
        })
    }
}

// Sign byte values used by collectives.
const REDUCE: u8 = 0;
const BROADCAST: u8 = 1;
const GATHER: u8 = 2;
const MISMATCH: u8 = 3;

const POLL: Duration = Duration::from_millis(20);

struct Envelope {
    src: usize,
    bytes: Vec<u8>,
}

struct Shared {
    abort: AtomicBool,
    first_failure: AtomicUsize,
}

impl Shared {
    fn new() -> Arc<Self> {
        Arc::new(Self {
            abort: AtomicBool::new(false),
            first_failure: AtomicUsize::new(usize::MAX),
        })
    }

    fn fail(&self, rank: usize) {
        if !self.abort.swap(true, Ordering::SeqCst) {
            self.first_failure.store(rank, Ordering::SeqCst);
        }
    }
}

enum Link {
    Serial {
        queue: VecDeque<Envelope>,
    },
    Channels {
        inbox: Receiver<Envelope>,
        peers: Vec<Sender<Envelope>>,
        stash: VecDeque<Envelope>,
        shared: Arc<Shared>,
    },
}

/// Traffic sent by one rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommStats {
    pub messages: u64,
    pub payload_bytes: u64,
    pub halo_bytes: u64,
}

/// One rank's endpoint. Every collective and exchange advances a phase
/// counter carried in the frame tags, so frames of different phases never
/// match each other even when streams interleave.
pub struct Comm {
    topo: Topology,
    link: Link,
    phase: u64,
    timeout: Option<Duration>,
    stats: CommStats,
}

impl std::fmt::Debug for Comm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Comm")
            .field("rank", &self.topo.rank)
            .field("size", &self.topo.size())
            .field("phase", &self.phase)
            .finish()
    }
}

impl Comm {
    /// A single-rank endpoint on the current thread.
    pub fn serial() -> Self {
        Self {
            topo: build_topology(ProcessGrid::single(), 0).expect("rank 0 exists"),
            link: Link::Serial { queue: VecDeque::new() },
            phase: 0,
            timeout: None,
            stats: CommStats::default(),
        }
    }

    pub fn rank(&self) -> usize {
        self.topo.rank
    }

    pub fn size(&self) -> usize {
        self.topo.size()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    pub fn set_timeout(&mut self, timeout: Option<Duration>) {
        self.timeout = timeout;
    }

    pub(crate) fn next_phase(&mut self) -> u64 {
        self.phase += 1;
        self.phase
    }

    pub(crate) fn send(&mut self, dest: usize, phase: u64, axis: u8, sign: u8, payload: &[u8]) -> Result<(), CommError> {
        let header = FrameHeader {
            phase,
            axis,
            sign,
            byte_len: payload.len() as u64,
        };
        let env = Envelope {
            src: self.topo.rank,
            bytes: encode_frame(header, payload),
        };
        self.stats.messages += 1;
        self.stats.payload_bytes += payload.len() as u64;
        if axis != COLLECTIVE_AXIS {
            self.stats.halo_bytes += payload.len() as u64;
        }
        match &mut self.link {
            Link::Serial { queue } => {
                if dest != 0 {
                    return Err(CommError::RankOutOfRange { rank: dest, size: 1 });
                }
                queue.push_back(env);
                Ok(())
            }
            Link::Channels { peers, .. } => {
                let peer = peers.get(dest).ok_or(CommError::RankOutOfRange {
                    rank: dest,
                    size: self.topo.size(),
                })?;
                peer.send(env).map_err(|_| CommError::TransportClosed)
            }
        }
    }

    /// Blocks until the frame `(src, phase, axis, sign)` arrives and returns
    /// its payload.
    pub(crate) fn recv(&mut self, src: usize, phase: u64, axis: u8, sign: u8, what: &str) -> Result<Vec<u8>, CommError> {
        let matches = |env: &Envelope| -> bool {
            env.src == src
                && FrameHeader::decode(&env.bytes)
                    .map(|h| h.phase == phase && h.axis == axis && (h.sign == sign || (axis == COLLECTIVE_AXIS && h.sign == MISMATCH)))
                    .unwrap_or(false)
        };
        let rank = self.topo.rank;
        let timeout = self.timeout;
        let env = match &mut self.link {
            Link::Serial { queue } => {
                let pos = queue.iter().position(matches).ok_or_else(|| {
                    CommError::CollectiveMismatch(format!("{what}: no message from rank {src} in phase {phase}"))
                })?;
                queue.remove(pos).unwrap()
            }
            Link::Channels {
                inbox, stash, shared, ..
            } => {
                if let Some(pos) = stash.iter().position(matches) {
                    stash.remove(pos).unwrap()
                } else {
                    let start = Instant::now();
                    loop {
                        match inbox.recv_timeout(POLL) {
                            Ok(env) if matches(&env) => break env,
                            Ok(env) => stash.push_back(env),
                            Err(RecvTimeoutError::Timeout) => {
                                if shared.abort.load(Ordering::SeqCst) {
                                    return Err(CommError::Aborted);
                                }
                                if let Some(limit) = timeout {
                                    if start.elapsed() > limit {
                                        shared.fail(rank);
                                        return Err(CommError::Timeout {
                                            stalled: format!(
                                                "rank {rank} waiting on rank {src} in {what} (phase {phase}, axis {axis}, sign {sign})"
                                            ),
                                            waited: start.elapsed(),
                                        });
                                    }
                                }
                            }
                            Err(RecvTimeoutError::Disconnected) => return Err(CommError::TransportClosed),
                        }
                    }
                }
            }
        };
        let (header, payload) = decode_frame(&env.bytes)?;
        if header.axis == COLLECTIVE_AXIS && header.sign == MISMATCH && sign != MISMATCH {
            return Err(CommError::CollectiveMismatch(format!(
                "{what}: root rejected the contributions in phase {phase}"
            )));
        }
        Ok(payload.to_vec())
    }

    /// Sums `local` over all ranks. Rank 0 adds contributions in ascending
    /// rank order and broadcasts the result, so every rank receives the same
    /// bits and repeated runs at a fixed rank count agree exactly.
    pub fn allreduce_det(&mut self, local: &[f64]) -> Result<Vec<f64>, CommError> {
        let phase = self.next_phase();
        let size = self.size();
        if size == 1 {
            return Ok(local.to_vec());
        }
        if self.rank() == 0 {
            let mut acc = local.to_vec();
            let mut mismatch = None;
            for src in 1..size {
                let values = bytes_to_f64s(&self.recv(src, phase, COLLECTIVE_AXIS, REDUCE, "allreduce")?);
                if values.len() != acc.len() {
                    mismatch.get_or_insert(format!(
                        "allreduce: rank {src} contributed {} values, rank 0 has {}",
                        values.len(),
                        acc.len()
                    ));
                    continue;
                }
                for (a, v) in acc.iter_mut().zip(values) {
                    *a += v;
                }
            }
            if let Some(msg) = mismatch {
                for dest in 1..size {
                    self.send(dest, phase, COLLECTIVE_AXIS, MISMATCH, &[])?;
                }
                return Err(CommError::CollectiveMismatch(msg));
            }
            let bytes = f64s_to_bytes(&acc);
            for dest in 1..size {
                self.send(dest, phase, COLLECTIVE_AXIS, BROADCAST, &bytes)?;
            }
            Ok(acc)
        } else {
            self.send(0, phase, COLLECTIVE_AXIS, REDUCE, &f64s_to_bytes(local))?;
            let result = bytes_to_f64s(&self.recv(0, phase, COLLECTIVE_AXIS, BROADCAST, "allreduce")?);
            if result.len() != local.len() {
                return Err(CommError::CollectiveMismatch(format!(
                    "allreduce: got {} values back for {} contributed",
                    result.len(),
                    local.len()
                )));
            }
            Ok(result)
        }
    }

    pub fn barrier(&mut self) -> Result<(), CommError> {
        self.allreduce_det(&[]).map(|_| ())
    }

    /// Collects every rank's payload on rank 0, indexed by rank.
    pub fn gather_bytes(&mut self, local: &[u8]) -> Result<Option<Vec<Vec<u8>>>, CommError> {
        let phase = self.next_phase();
        if self.rank() == 0 {
            let mut all = Vec::with_capacity(self.size());
            all.push(local.to_vec());
            for src in 1..self.size() {
                all.push(self.recv(src, phase, COLLECTIVE_AXIS, GATHER, "gather")?);
            }
            Ok(Some(all))
        } else {
            self.send(0, phase, COLLECTIVE_AXIS, GATHER, local)?;
            Ok(None)
        }
    }
}

/// Runs `work` once per rank of `grid` and returns the per-rank results in
/// rank order.
///
/// If any rank fails, the others are released from blocking receives with
/// [`CommError::Aborted`] and the error of the first failing rank is
/// returned. `timeout` arms the watchdog on every blocking receive.
pub fn run_ranks<T, E, F>(grid: ProcessGrid, kind: TransportKind, timeout: Option<Duration>, work: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send + From<CommError>,
    F: Fn(&mut Comm) -> Result<T, E> + Sync,
{
    let size = grid.ranks();
    match kind {
        TransportKind::Serial => {
            if size != 1 {
                return Err(CommError::SerialNeedsOneRank { ranks: size }.into());
            }
            let mut comm = Comm::serial();
            comm.set_timeout(timeout);
            Ok(vec![work(&mut comm)?])
        }
        TransportKind::Concurrent => {
            let shared = Shared::new();
            let (senders, receivers): (Vec<_>, Vec<_>) = (0..size).map(|_| mpsc::channel::<Envelope>()).unzip();
            let mut comms = Vec::with_capacity(size);
            for (rank, inbox) in receivers.into_iter().enumerate() {
                comms.push(Comm {
                    topo: build_topology(grid, rank)?,
                    link: Link::Channels {
                        inbox,
                        peers: senders.clone(),
                        stash: VecDeque::new(),
                        shared: Arc::clone(&shared),
                    },
                    phase: 0,
                    timeout,
                    stats: CommStats::default(),
                });
            }
            drop(senders);

            let results: Vec<Result<T, E>> = std::thread::scope(|scope| {
                let handles: Vec<_> = comms
                    .into_iter()
                    .map(|mut comm| {
                        let shared = Arc::clone(&shared);
                        let work = &work;
                        scope.spawn(move || {
                            let rank = comm.rank();
                            let guard = FailOnPanic { shared: &shared, rank };
                            let out = work(&mut comm);
                            std::mem::forget(guard);
                            if out.is_err() {
                                shared.fail(rank);
                            }
                            out
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                    .collect()
            });

            let first = shared.first_failure.load(Ordering::SeqCst);
            let mut out = Vec::with_capacity(size);
            let mut first_err = None;
            for (rank, r) in results.into_iter().enumerate() {
                match r {
                    Ok(v) => out.push(v),
                    Err(e) if rank == first => return Err(e),
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(out),
            }
        }
    }
}

struct FailOnPanic<'a> {
    shared: &'a Shared,
    rank: usize,
}

impl Drop for FailOnPanic<'_> {
    fn drop(&mut self) {
        self.shared.fail(self.rank);
    }
}
