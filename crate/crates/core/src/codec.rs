//! Moving window network coding.
//!
//! At slot `t` the source combines packets `max(1, ⌈V·t⌉ - W + 1) ..= ⌈V·t⌉`
//! with uniformly random GF(2^8) coefficients. Receivers run a progressive
//! elimination: every received symbol is reduced against decoded packets and
//! the stored rows, kept if innovative, and the whole live span is
//! back-substituted once the stored rows reach full rank. At the end of each
//! slot [`Decoder::advance`] declares the packets that can no longer be
//! recovered because the window tail has passed an unseen packet.
//!
//! Operation counts are coefficient-level multiply-adds: clearing an entry
//! that belongs to an already decoded packet costs one, reducing with a stored
//! row costs that row's band length, and back substitution of a row costs its
//! nonzero count.

use std::borrow::Cow;
use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf256::{self, FieldVector};
use crate::rational::Ratio;

/// Window size, window speed and payload length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecParams {
    pub window: u64,
    pub speed: Ratio,
    pub payload_len: usize,
}

impl CodecParams {
    pub fn new(window: u64, speed: Ratio, payload_len: usize) -> Result<Self> {
        if window < 1 {
            return Err(Error::Domain("window size must be at least 1".into()));
        }
        if speed.numer() <= 0 || speed > Ratio::integer(1) {
            return Err(Error::Domain(format!("window speed {speed} outside (0, 1]")));
        }
        Ok(CodecParams {
            window,
            speed,
            payload_len,
        })
    }

    /// `⌈V·t⌉`, zero at `t = 0`.
    #[inline]
    pub fn head(&self, t: u64) -> u64 {
        self.speed.ceil_mul(t) as u64
    }

    /// `⌈V·t⌉ - W + 1` clamped at 1.
    #[inline]
    pub fn tail(&self, t: u64) -> u64 {
        let h = self.head(t) as i64 - self.window as i64 + 1;
        h.max(1) as u64
    }

    /// First slot whose window contains packet `id`.
    pub fn first_slot_of(&self, id: u64) -> u64 {
        // smallest t with V·t > id - 1
        let (n, d) = (self.speed.numer() as u128, self.speed.denom() as u128);
        ((id as u128 - 1) * d / n + 1) as u64
    }
}

/// Window of packets combined at slot `t`.
pub fn window_bounds(t: u64, params: &CodecParams) -> Result<(u64, u64)> {
    if t < 1 {
        return Err(Error::Domain("slot index must be at least 1".into()));
    }
    Ok((params.tail(t), params.head(t)))
}

/// One coded transmission: a span of packets, its coefficients and the
/// combined payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedSymbol {
    pub slot: u64,
    pub window_lo: u64,
    pub window_hi: u64,
    pub coefficients: FieldVector,
    pub payload: Vec<u8>,
}

impl CodedSymbol {
    pub fn span_len(&self) -> usize {
        (self.window_hi - self.window_lo + 1) as usize
    }

    fn validate(&self, payload_len: usize) -> Result<()> {
        if self.window_lo < 1 || self.window_hi < self.window_lo {
            return Err(Error::Domain(format!(
                "bad symbol span [{}, {}]",
                self.window_lo, self.window_hi
            )));
        }
        if self.coefficients.len() != self.span_len() {
            return Err(Error::Domain(format!(
                "span of {} packets but {} coefficients",
                self.span_len(),
                self.coefficients.len()
            )));
        }
        if self.payload.len() != payload_len {
            return Err(Error::Domain(format!(
                "payload of {} bytes, expected {payload_len}",
                self.payload.len()
            )));
        }
        if self.coefficients.is_all_zero() {
            return Err(Error::Domain("all-zero coefficient vector".into()));
        }
        Ok(())
    }

    /// Little-endian framing: slot, window_lo, window_hi as u64, then the
    /// coefficient bytes, then the payload bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.coefficients.len() + self.payload.len());
        out.extend_from_slice(&self.slot.to_le_bytes());
        out.extend_from_slice(&self.window_lo.to_le_bytes());
        out.extend_from_slice(&self.window_hi.to_le_bytes());
        out.extend_from_slice(self.coefficients.as_slice());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CodedSymbol> {
        let word = |i: usize| -> Result<u64> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
                .ok_or_else(|| Error::Domain("truncated symbol header".into()))
        };
        let (slot, lo, hi) = (word(0)?, word(1)?, word(2)?);
        if lo < 1 || hi < lo {
            return Err(Error::Domain(format!("bad symbol span [{lo}, {hi}]")));
        }
        let n = (hi - lo + 1) as usize;
        let body = &bytes[24..];
        if body.len() < n {
            return Err(Error::Domain("truncated coefficient block".into()));
        }
        Ok(CodedSymbol {
            slot,
            window_lo: lo,
            window_hi: hi,
            coefficients: FieldVector::new(body[..n].to_vec())?,
            payload: body[n..].to_vec(),
        })
    }
}

/// Source packets addressed by 1-based sequence number.
pub trait PacketSource {
    fn packet(&self, id: u64) -> Option<Cow<'_, [u8]>>;
}

impl PacketSource for [Vec<u8>] {
    fn packet(&self, id: u64) -> Option<Cow<'_, [u8]>> {
        id.checked_sub(1)
            .and_then(|i| self.get(i as usize))
            .map(|p| Cow::Borrowed(p.as_slice()))
    }
}

impl PacketSource for Vec<Vec<u8>> {
    fn packet(&self, id: u64) -> Option<Cow<'_, [u8]>> {
        self.as_slice().packet(id)
    }
}

/// Unbounded stream of pseudo-random packets derived from a seed, so long
/// simulations need no packet storage.
#[derive(Clone, Copy, Debug)]
pub struct SeededPackets {
    pub seed: u64,
    pub payload_len: usize,
}

impl SeededPackets {
    pub fn payload(&self, id: u64) -> Vec<u8> {
        // splitmix64 stream keyed by (seed, id)
        let mut state = self.seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut out = Vec::with_capacity(self.payload_len);
        while out.len() < self.payload_len {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            for b in z.to_le_bytes() {
                if out.len() < self.payload_len {
                    out.push(b);
                }
            }
        }
        out
    }
}

impl PacketSource for SeededPackets {
    fn packet(&self, id: u64) -> Option<Cow<'_, [u8]>> {
        (id >= 1).then(|| Cow::Owned(self.payload(id)))
    }
}

fn draw_nonzero_vector<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    loop {
        rng.fill_bytes(&mut v);
        if v.iter().any(|&c| c != 0) {
            return v;
        }
    }
}

/// Source encoding at slot `t`.
pub fn encode<P, R>(t: u64, packets: &P, params: &CodecParams, rng: &mut R) -> Result<CodedSymbol>
where
    P: PacketSource + ?Sized,
    R: RngCore + ?Sized,
{
    let (lo, hi) = window_bounds(t, params)?;
    let coefficients = draw_nonzero_vector(rng, (hi - lo + 1) as usize);
    let mut payload = vec![0u8; params.payload_len];
    for (k, id) in (lo..=hi).enumerate() {
        let p = packets
            .packet(id)
            .ok_or_else(|| Error::Domain(format!("packet {id} not available")))?;
        if p.len() != params.payload_len {
            return Err(Error::Domain(format!(
                "packet {id} has {} bytes, expected {}",
                p.len(),
                params.payload_len
            )));
        }
        gf256::axpy_unchecked(&mut payload, &p, coefficients[k]);
    }
    Ok(CodedSymbol {
        slot: t,
        window_lo: lo,
        window_hi: hi,
        coefficients: FieldVector::new(coefficients)?,
        payload,
    })
}

/// Packets recovered at one slot, in increasing id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeEvent {
    pub slot: u64,
    pub packets: Vec<u64>,
    pub payloads: Vec<Vec<u8>>,
}

/// Packets declared unrecoverable at the end of one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LossEvent {
    pub slot: u64,
    pub packets: Vec<u64>,
    /// Rows discarded together with the lost packets.
    pub discarded: u64,
}

/// What happened to one received symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ingest {
    pub innovative: bool,
    /// Nonzero coefficients left after forward elimination.
    pub residual_nonzeros: usize,
    /// Width from the new pivot to the last nonzero coefficient.
    pub residual_band: usize,
    /// Pivot column of the stored row.
    pub pivot: Option<u64>,
    pub ops: u64,
    pub event: Option<DecodeEvent>,
}

/// Read-only snapshot of the decoder counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Packets declared lost.
    pub lost: u64,
    /// Innovative symbols received.
    pub innovative: u64,
    /// Innovative symbols later discarded.
    pub discarded: u64,
    pub op_count: u64,
    /// Nonzero coefficients per stored row, in pivot order.
    pub row_nonzeros: Vec<usize>,
    pub decoded: u64,
    /// Receptions whose innovation outcome differed from the ideal
    /// (infinite field) one: redundant symbols that still covered unseen
    /// packets, new pivots that skipped an unseen packet, or rows that stop
    /// short of the symbol's head.
    pub collisions: u64,
}

#[derive(Clone, Debug)]
struct Row {
    pivot: u64,
    /// Coefficients for packets `pivot ..`, first entry nonzero.
    coeffs: Vec<u8>,
    payload: Vec<u8>,
}

impl Row {
    #[inline]
    fn end(&self) -> u64 {
        self.pivot + self.coeffs.len() as u64 - 1
    }
}

/// Receiver side of MWNC.
#[derive(Clone, Debug)]
pub struct Decoder {
    params: CodecParams,
    /// Every packet `<= front` is decoded or lost.
    front: u64,
    rows: BTreeMap<u64, Row>,
    /// Payloads of decoded packets still inside the window (`None` = lost),
    /// indexed from `recent_base`.
    recent: VecDeque<Option<Vec<u8>>>,
    recent_base: u64,
    lost_ids: Vec<u64>,
    lost: u64,
    innovative: u64,
    discarded: u64,
    decoded: u64,
    op_count: u64,
    collisions: u64,
    last_slot: u64,
}

impl Decoder {
    pub fn new(params: CodecParams) -> Self {
        Decoder {
            params,
            front: 0,
            rows: BTreeMap::new(),
            recent: VecDeque::new(),
            recent_base: 1,
            lost_ids: Vec::new(),
            lost: 0,
            innovative: 0,
            discarded: 0,
            decoded: 0,
            op_count: 0,
            collisions: 0,
            last_slot: 0,
        }
    }

    pub fn params(&self) -> &CodecParams {
        &self.params
    }

    /// Highest id such that every packet up to it is decoded or lost.
    pub fn front(&self) -> u64 {
        self.front
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn lost_ids(&self) -> &[u64] {
        &self.lost_ids
    }

    /// `G + I - D`: decoded plus lost plus stored rows.
    pub fn seen_front(&self) -> u64 {
        self.lost + self.innovative - self.discarded
    }

    pub fn is_decoded(&self, id: u64) -> bool {
        matches!(self.recent_entry(id), Some(Some(_)))
    }

    /// Payload of a decoded packet still held in the window buffer.
    pub fn decoded_payload(&self, id: u64) -> Option<&[u8]> {
        self.recent_entry(id).and_then(|e| e.as_deref())
    }

    fn recent_entry(&self, id: u64) -> Option<&Option<Vec<u8>>> {
        if id < self.recent_base || id > self.front {
            return None;
        }
        self.recent.get((id - self.recent_base) as usize)
    }

    /// Field operations performed so far.
    pub fn op_count(&self) -> u64 {
        self.op_count
    }

    pub fn counters(&self) -> Counters {
        Counters {
            lost: self.lost,
            innovative: self.innovative,
            discarded: self.discarded,
            op_count: self.op_count,
            row_nonzeros: self
                .rows
                .values()
                .map(|r| r.coeffs.iter().filter(|&&c| c != 0).count())
                .collect(),
            decoded: self.decoded,
            collisions: self.collisions,
        }
    }

    /// `S(t) = V·t - G(t) - (I(t) - D(t))`.
    pub fn particle_position(&self, t: u64) -> Ratio {
        self.params
            .speed
            .mul_int(t as i64)
            .sub(Ratio::integer(self.seen_front() as i64))
    }

    /// Reduces a received symbol and stores it if innovative. Emits a decode
    /// event when the stored rows reach full rank over the live span.
    pub fn ingest(&mut self, symbol: &CodedSymbol) -> Result<Ingest> {
        symbol.validate(self.params.payload_len)?;
        if symbol.slot < self.last_slot {
            return Err(Error::Domain(format!(
                "symbol slot {} precedes previous slot {}",
                symbol.slot, self.last_slot
            )));
        }
        self.last_slot = symbol.slot;
        let redundant = Ingest {
            innovative: false,
            residual_nonzeros: 0,
            residual_band: 0,
            pivot: None,
            ops: 0,
            event: None,
        };

        // Nothing unknown in the span: drop without touching it.
        if symbol.window_hi <= self.front {
            return Ok(redundant);
        }

        let lo = symbol.window_lo;
        let row_end = self
            .rows
            .range(lo..)
            .map(|(_, r)| r.end())
            .max()
            .unwrap_or(0);
        let hi = symbol.window_hi.max(row_end);
        let mut w = vec![0u8; (hi - lo + 1) as usize];
        w[..symbol.span_len()].copy_from_slice(symbol.coefficients.as_slice());
        let mut y = symbol.payload.clone();
        let mut ops = 0u64;

        // Decoded packets in the span.
        let known_hi = self.front.min(symbol.window_hi);
        for id in lo..=known_hi {
            let c = w[(id - lo) as usize];
            if c == 0 {
                continue;
            }
            match self.recent_entry(id) {
                Some(Some(p)) => {
                    gf256::axpy_unchecked(&mut y, p, c);
                    w[(id - lo) as usize] = 0;
                    ops += 1;
                }
                Some(None) | None => {
                    // involves a packet that is lost or no longer buffered
                    self.op_count += ops;
                    return Ok(Ingest { ops, ..redundant });
                }
            }
        }

        // Stored rows, in pivot order.
        for row in self.rows.range(lo..=hi).map(|(_, r)| r) {
            let c = w[(row.pivot - lo) as usize];
            if c == 0 {
                continue;
            }
            let factor = gf256::mul(c, gf256::inv(row.coeffs[0])?);
            let off = (row.pivot - lo) as usize;
            ops += gf256::axpy_unchecked(&mut w[off..off + row.coeffs.len()], &row.coeffs, factor);
            gf256::axpy_unchecked(&mut y, &row.payload, factor);
        }
        self.op_count += ops;

        let Some(first) = w.iter().position(|&c| c != 0) else {
            if symbol.window_hi > self.seen_front() {
                self.collisions += 1;
            }
            return Ok(Ingest { ops, ..redundant });
        };
        let last = w.iter().rposition(|&c| c != 0).expect("nonzero entry");
        let pivot = lo + first as u64;
        if pivot != self.seen_front() + 1 || lo + (last as u64) < symbol.window_hi {
            self.collisions += 1;
        }
        let coeffs = w[first..=last].to_vec();
        let residual_nonzeros = coeffs.iter().filter(|&&c| c != 0).count();
        let residual_band = coeffs.len();
        self.rows.insert(
            pivot,
            Row {
                pivot,
                coeffs,
                payload: y,
            },
        );
        self.innovative += 1;

        let event = self.try_decode(symbol.slot);
        Ok(Ingest {
            innovative: true,
            residual_nonzeros,
            residual_band,
            pivot: Some(pivot),
            ops,
            event,
        })
    }

    fn try_decode(&mut self, slot: u64) -> Option<DecodeEvent> {
        let end = self.rows.values().map(Row::end).max()?;
        if self.rows.len() as u64 != end - self.front {
            return None;
        }
        // Every column in (front, end] is a pivot: back substitute.
        let n = (end - self.front) as usize;
        let mut solved: Vec<Vec<u8>> = vec![Vec::new(); n];
        let mut ops = 0u64;
        let rows = std::mem::take(&mut self.rows);
        for (pivot, row) in rows.into_iter().rev() {
            let Row {
                coeffs,
                mut payload,
                ..
            } = row;
            for (k, &c) in coeffs.iter().enumerate().skip(1) {
                if c != 0 {
                    let col = (pivot + k as u64 - self.front - 1) as usize;
                    gf256::axpy_unchecked(&mut payload, &solved[col], c);
                    ops += 1;
                }
            }
            let inv = gf256::inv(coeffs[0]).expect("pivot is nonzero");
            gf256::scale_in_place(&mut payload, inv);
            ops += 1;
            solved[(pivot - self.front - 1) as usize] = payload;
        }
        self.op_count += ops;
        let first = self.front + 1;
        self.front = end;
        self.decoded += n as u64;
        self.recent.extend(solved.iter().cloned().map(Some));
        Some(DecodeEvent {
            slot,
            packets: (first..=end).collect(),
            payloads: solved,
        })
    }

    /// End-of-slot bookkeeping: declares packets lost once the packet just
    /// before the next window tail is unseen, then drops decoded payloads
    /// that left the window.
    pub fn advance(&mut self, t: u64) -> Option<LossEvent> {
        let next_head = self.params.head(t + 1) as i64;
        let edge = next_head - self.params.window as i64; // packet before next tail
        let mut event = None;
        if edge >= 1 {
            let edge = edge as u64;
            if edge > self.front && !self.rows.contains_key(&edge) {
                let kept = self.rows.split_off(&(edge + 1));
                let dropped = std::mem::replace(&mut self.rows, kept).len() as u64;
                let packets: Vec<u64> = (self.front + 1..=edge).collect();
                self.lost += packets.len() as u64;
                self.discarded += dropped;
                self.lost_ids.extend_from_slice(&packets);
                self.recent.extend(packets.iter().map(|_| None));
                self.front = edge;
                event = Some(LossEvent {
                    slot: t,
                    packets,
                    discarded: dropped,
                });
            }
        }
        let next_tail = self.params.tail(t + 1);
        while self.recent_base < next_tail && !self.recent.is_empty() {
            self.recent.pop_front();
            self.recent_base += 1;
        }
        if self.recent.is_empty() {
            self.recent_base = self.front + 1;
        }
        event
    }

    /// Random combination of this node's knowledge inside the expected
    /// window at slot `t`: its decoded packets there plus every stored row
    /// that overlaps the window. `None` when it knows nothing relevant.
    pub fn relay_recode<R: RngCore + ?Sized>(&self, t: u64, rng: &mut R) -> Result<Option<CodedSymbol>> {
        let (lo, hi) = window_bounds(t, &self.params)?;
        let decoded: Vec<(u64, &[u8])> = (lo..=hi.min(self.front))
            .filter_map(|id| self.decoded_payload(id).map(|p| (id, p)))
            .collect();
        let rows: Vec<&Row> = self
            .rows
            .range(..=hi)
            .map(|(_, r)| r)
            .filter(|r| r.end() >= lo)
            .collect();
        if decoded.is_empty() && rows.is_empty() {
            return Ok(None);
        }
        let span_lo = decoded
            .first()
            .map(|d| d.0)
            .into_iter()
            .chain(rows.iter().map(|r| r.pivot))
            .min()
            .expect("nonempty knowledge");
        let span_hi = decoded
            .last()
            .map(|d| d.0)
            .into_iter()
            .chain(rows.iter().map(|r| r.end()))
            .max()
            .expect("nonempty knowledge");
        let n = (span_hi - span_lo + 1) as usize;
        loop {
            let weights = draw_nonzero_vector(rng, decoded.len() + rows.len());
            let mut coeffs = vec![0u8; n];
            let mut payload = vec![0u8; self.params.payload_len];
            for (&(id, p), &a) in decoded.iter().zip(&weights) {
                coeffs[(id - span_lo) as usize] ^= a;
                gf256::axpy_unchecked(&mut payload, p, a);
            }
            for (row, &a) in rows.iter().zip(&weights[decoded.len()..]) {
                let off = (row.pivot - span_lo) as usize;
                gf256::axpy_unchecked(&mut coeffs[off..off + row.coeffs.len()], &row.coeffs, a);
                gf256::axpy_unchecked(&mut payload, &row.payload, a);
            }
            if coeffs.iter().all(|&c| c == 0) {
                continue;
            }
            return Ok(Some(CodedSymbol {
                slot: t,
                window_lo: span_lo,
                window_hi: span_hi,
                coefficients: FieldVector::new(coeffs)?,
                payload,
            }));
        }
    }
}
