//! GF(2^8) arithmetic and the row operation the decoder is built on.

use mwnc::gf256::{self, FieldVector, Gf256};

fn main() -> mwnc::Result<()> {
    let a = 0x53;
    let b = 0xCA;
    println!("{a:#04x} + {b:#04x} = {:#04x}", gf256::add(a, b));
    println!("{a:#04x} * {b:#04x} = {:#04x}", gf256::mul(a, b));
    let inv = gf256::inv(a)?;
    println!("{a:#04x}^-1 = {inv:#04x}, check {:#04x}", gf256::mul(a, inv));
    assert!(Gf256::from(0).inv().is_err());

    let mut row = FieldVector::new(vec![1, 2, 3, 4])?;
    let other = FieldVector::new(vec![5, 6, 7, 8])?;
    let ops = row.axpy(&other, Gf256::from(3))?;
    println!("row += 3 * other -> {:?} ({ops} ops)", row.as_slice());
    Ok(())
}
