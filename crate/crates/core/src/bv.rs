//! Fixed-width bitvector arithmetic on `u128` words.
//!
//! Every function takes already-masked operands and returns a masked result.
//! Semantics follow SMT-LIB `QF_BV`: wrap-around arithmetic, total division
//! (`x / 0 = all-ones`, `x % 0 = x`), shifts by at least the width saturate.

/// Widest bitvector the toolkit supports.
pub const MAX_WIDTH: u32 = 128;

#[inline]
pub fn mask(width: u32) -> u128 {
    debug_assert!((1..=MAX_WIDTH).contains(&width));
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[inline]
pub fn fits(width: u32, value: u128) -> bool {
    value & !mask(width) == 0
}

#[inline]
pub fn sign_bit(width: u32, x: u128) -> bool {
    (x >> (width - 1)) & 1 == 1
}

pub fn add(w: u32, a: u128, b: u128) -> u128 {
    a.wrapping_add(b) & mask(w)
}

pub fn sub(w: u32, a: u128, b: u128) -> u128 {
    a.wrapping_sub(b) & mask(w)
}

pub fn mul(w: u32, a: u128, b: u128) -> u128 {
    a.wrapping_mul(b) & mask(w)
}

pub fn udiv(w: u32, a: u128, b: u128) -> u128 {
    a.checked_div(b).unwrap_or(mask(w))
}

pub fn urem(_w: u32, a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        a % b
    }
}

pub fn not(w: u32, a: u128) -> u128 {
    !a & mask(w)
}

pub fn shl(w: u32, a: u128, b: u128) -> u128 {
    if b >= w as u128 {
        0
    } else {
        (a << b) & mask(w)
    }
}

pub fn lshr(w: u32, a: u128, b: u128) -> u128 {
    if b >= w as u128 {
        0
    } else {
        a >> b
    }
}

pub fn ashr(w: u32, a: u128, b: u128) -> u128 {
    let neg = sign_bit(w, a);
    if b >= w as u128 {
        return if neg { mask(w) } else { 0 };
    }
    let shifted = a >> b;
    if neg {
        // fill the vacated high bits with ones
        let fill = mask(w) & !(mask(w) >> b);
        shifted | fill
    } else {
        shifted
    }
}

pub fn concat(lo_width: u32, hi: u128, lo: u128) -> u128 {
    (hi << lo_width) | lo
}

pub fn extract(hi: u32, lo: u32, a: u128) -> u128 {
    (a >> lo) & mask(hi - lo + 1)
}

pub fn sign_extend(w: u32, extra: u32, a: u128) -> u128 {
    if sign_bit(w, a) {
        a | (mask(w + extra) & !mask(w))
    } else {
        a
    }
}

fn to_signed(w: u32, a: u128) -> i128 {
    if w == 128 {
        a as i128
    } else if sign_bit(w, a) {
        (a as i128) - (1i128 << w)
    } else {
        a as i128
    }
}

pub fn slt(w: u32, a: u128, b: u128) -> bool {
    to_signed(w, a) < to_signed(w, b)
}

pub fn sle(w: u32, a: u128, b: u128) -> bool {
    to_signed(w, a) <= to_signed(w, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_by_zero_is_total() {
        assert_eq!(udiv(8, 7, 0), 255);
        assert_eq!(urem(8, 7, 0), 7);
    }

    #[test]
    fn shifts_saturate() {
        assert_eq!(shl(8, 1, 8), 0);
        assert_eq!(lshr(8, 0x80, 9), 0);
        assert_eq!(ashr(8, 0x80, 3), 0xF0);
        assert_eq!(ashr(8, 0x80, 200), 0xFF);
        assert_eq!(ashr(8, 0x40, 200), 0);
    }

    #[test]
    fn signed_compare() {
        assert!(slt(4, 0b1000, 0b0111));
        assert!(!slt(4, 0b0111, 0b1000));
        assert!(sle(128, u128::MAX, 0));
    }

    #[test]
    fn extension() {
        assert_eq!(sign_extend(4, 4, 0b1010), 0b1111_1010);
        assert_eq!(sign_extend(4, 4, 0b0010), 0b0000_0010);
        assert_eq!(extract(7, 4, 0xAB), 0xA);
        assert_eq!(concat(8, 0xA, 0xBC), 0xABC);
    }
}
