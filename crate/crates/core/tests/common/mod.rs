#![allow(dead_code)]

use mwnc::analysis::ReflectedWalk;
use mwnc::codec::{encode, CodecParams, Decoder, SeededPackets};
use mwnc::coopsched::Topology;
use mwnc::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source 0; relays 1 and 2 with source links 0.7 and 0.9; end receiver 3
/// with links 0.9, 0.8 from the relays and 0.4 from the source.
pub fn three_node() -> Topology {
    Topology::new(
        vec![
            vec![0.0, 0.7, 0.9, 0.4],
            vec![0.7, 0.0, 0.0, 0.9],
            vec![0.9, 0.0, 0.0, 0.8],
            vec![0.4, 0.9, 0.8, 0.0],
        ],
        2,
    )
    .unwrap()
}

pub fn ratio(n: i64, d: i64) -> Ratio {
    Ratio::new(n, d).unwrap()
}

/// Decoder and walk positions side by side over one Bernoulli run.
pub struct Trajectory {
    pub decoder: Vec<Ratio>,
    pub walk: Vec<Ratio>,
    /// First slot whose reception hit a field collision.
    pub first_collision: Option<usize>,
    pub decode_slots: Vec<u64>,
    pub loss_slots: Vec<u64>,
}

/// Drives a decoder with a source over a Bernoulli(`c`) channel and a
/// reflected walk with the receptions the decoder found innovative, or
/// with the raw receptions when `raw` is set.
pub fn trajectory(w: u64, v: Ratio, c: f64, slots: u64, seed: u64, raw: bool) -> Trajectory {
    let params = CodecParams::new(w, v, 0).unwrap();
    let packets = SeededPackets { seed, payload_len: 0 };
    let mut dec = Decoder::new(params);
    let mut walk = ReflectedWalk::new(w, v).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chan = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Trajectory {
        decoder: Vec::new(),
        walk: Vec::new(),
        first_collision: None,
        decode_slots: Vec::new(),
        loss_slots: Vec::new(),
    };
    for t in 1..=slots {
        let sym = encode(t, &packets, &params, &mut rng).unwrap();
        let received = chan.gen::<f64>() < c;
        let mut innovative = false;
        if received {
            let before = dec.counters().collisions;
            let ing = dec.ingest(&sym).unwrap();
            innovative = ing.innovative;
            if ing.event.is_some() {
                out.decode_slots.push(t);
            }
            if dec.counters().collisions != before && out.first_collision.is_none() {
                out.first_collision = Some(out.decoder.len());
            }
        }
        if dec.advance(t).is_some() {
            out.loss_slots.push(t);
        }
        walk.step(if raw { received } else { innovative });
        out.decoder.push(dec.particle_position(t));
        out.walk.push(walk.position());
    }
    out
}

pub const GOLDEN_RECEPTIONS: [u64; 4] = [2, 4, 8, 13];

/// Replay of the V=1/2, W=3 trace with receptions at slots 2, 4, 8, 13.
pub struct GoldenTrace {
    pub decodes: Vec<(u64, Vec<u64>)>,
    pub losses: Vec<(u64, Vec<u64>, u64)>,
    pub innovative: Vec<bool>,
    /// S(t) after any reception, before the end-of-slot check.
    pub s_before_advance: Vec<Ratio>,
    /// S(t) at the end of each slot.
    pub s_end: Vec<Ratio>,
    pub decoder: Decoder,
    pub packets: SeededPackets,
}

pub fn golden_trace(seed: u64) -> GoldenTrace {
    let params = CodecParams::new(3, ratio(1, 2), 4).unwrap();
    let packets = SeededPackets { seed: 0xAB, payload_len: 4 };
    let mut dec = Decoder::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GoldenTrace {
        decodes: Vec::new(),
        losses: Vec::new(),
        innovative: Vec::new(),
        s_before_advance: Vec::new(),
        s_end: Vec::new(),
        decoder: dec.clone(),
        packets,
    };
    for t in 1..=13 {
        let sym = encode(t, &packets, &params, &mut rng).unwrap();
        if GOLDEN_RECEPTIONS.contains(&t) {
            let ing = dec.ingest(&sym).unwrap();
            out.innovative.push(ing.innovative);
            if let Some(ev) = ing.event {
                out.decodes.push((t, ev.packets));
            }
        }
        out.s_before_advance.push(dec.particle_position(t));
        if let Some(ev) = dec.advance(t) {
            out.losses.push((t, ev.packets, ev.discarded));
        }
        out.s_end.push(dec.particle_position(t));
    }
    out.decoder = dec;
    out
}

/// Seed for which every reception in the trace is innovative.
pub const GOLDEN_SEED: u64 = 1;
