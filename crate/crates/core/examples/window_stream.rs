//! One sender, one receiver over a Bernoulli erasure link.

use mwnc::codec::{encode, CodecParams, Decoder, SeededPackets};
use mwnc::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mwnc::Result<()> {
    let params = CodecParams::new(8, Ratio::new(3, 5)?, 16)?;
    let packets = SeededPackets { seed: 7, payload_len: 16 };
    let mut decoder = Decoder::new(params);
    let mut coder = ChaCha8Rng::seed_from_u64(1);
    let mut channel = ChaCha8Rng::seed_from_u64(2);

    for t in 1..=40 {
        let (lo, hi) = mwnc::codec::window_bounds(t, &params)?;
        if channel.gen::<f64>() < 0.8 {
            let symbol = encode(t, &packets, &params, &mut coder)?;
            let ingest = decoder.ingest(&symbol)?;
            if let Some(ev) = ingest.event {
                for (id, payload) in ev.packets.iter().zip(&ev.payloads) {
                    assert_eq!(payload, &packets.payload(*id));
                }
                println!("t={t:2} window [{lo},{hi}] decoded {:?}", ev.packets);
            }
        }
        if let Some(loss) = decoder.advance(t) {
            println!("t={t:2} lost {:?}", loss.packets);
        }
    }
    println!("{:?}", decoder.counters());
    Ok(())
}
