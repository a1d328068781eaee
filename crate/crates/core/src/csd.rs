//! Canonical signed digit recoding.

/// CSD digits of `v`, least significant first, each in `{-1, 0, 1}` with no
/// two adjacent nonzero digits.
pub fn digits(v: u64) -> Vec<i8> {
    let mut out = Vec::new();
    let mut n = v as u128;
    while n != 0 {
        if n & 1 == 1 {
            // 2 - (n mod 4): +1 when n = 1 (mod 4), -1 when n = 3 (mod 4)
            let d: i8 = if n & 3 == 1 { 1 } else { -1 };
            out.push(d);
            if d == 1 {
                n -= 1;
            } else {
                n += 1;
            }
        } else {
            out.push(0);
        }
        n >>= 1;
    }
    out
}

/// Nonzero CSD digits, `popcount((3v ^ v) >> 1)`.
pub fn nonzeros(v: u64) -> u32 {
    let v = v as u128;
    (((3 * v) ^ v) >> 1).count_ones()
}

/// Adders a plain CSD shift-add realization of `v` needs.
pub fn adder_cost(v: u64) -> u32 {
    nonzeros(v).saturating_sub(1)
}
