//! Dot products of binary floats with exact fixed-point accumulation.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::ops::UnsignedAbs;
use dashu_int::{IBig, Sign, UBig};

type Float = FBig<HalfEven, 2>;

/// Entries unpacked into sign, exponent and 64-bit significand limbs.
pub(crate) struct Packed {
    limbs: usize,
    words: Vec<u64>,
    len: Vec<u32>,
    exp: Vec<isize>,
    top: Vec<isize>,
    sign: Vec<i8>,
}

impl Packed {
    pub(crate) fn from_entries<'a>(entries: impl Iterator<Item = &'a Float>) -> Self {
        let parts: Vec<(i8, isize, Vec<u64>)> = entries
            .map(|x| {
                let repr = x.repr();
                let sig = repr.significand();
                if sig.is_zero() {
                    return (0, 0, Vec::new());
                }
                let sign = if sig.sign() == Sign::Negative { -1 } else { 1 };
                let mag: UBig = sig.clone().unsigned_abs();
                (sign, repr.exponent(), mag.as_words().to_vec())
            })
            .collect();
        let limbs = parts.iter().map(|p| p.2.len()).max().unwrap_or(0).max(1);
        let n = parts.len();
        let mut packed = Packed {
            limbs,
            words: vec![0; n * limbs],
            len: Vec::with_capacity(n),
            exp: Vec::with_capacity(n),
            top: Vec::with_capacity(n),
            sign: Vec::with_capacity(n),
        };
        for (e, (sign, exp, w)) in parts.into_iter().enumerate() {
            packed.words[e * limbs..e * limbs + w.len()].copy_from_slice(&w);
            let bitlen = match w.last() {
                Some(&hi) => 64 * w.len() as isize - hi.leading_zeros() as isize,
                None => 0,
            };
            packed.len.push(w.len() as u32);
            packed.exp.push(exp);
            packed.top.push(exp + bitlen);
            packed.sign.push(sign);
        }
        packed
    }

    pub(crate) fn limbs(&self) -> usize {
        self.limbs
    }

    fn mantissa(&self, e: usize) -> &[u64] {
        &self.words[e * self.limbs..e * self.limbs + self.len[e] as usize]
    }
}

/// Scratch space reused across dot products.
pub(crate) struct DotAccumulator {
    pos: Vec<u64>,
    neg: Vec<u64>,
    prod: Vec<u64>,
}

impl DotAccumulator {
    pub(crate) fn new(limbs: usize) -> Self {
        let width = 2 * limbs + 3;
        Self { pos: vec![0; width], neg: vec![0; width], prod: vec![0; 2 * limbs] }
    }

    /// `sum_l a[ia + l] * b[ib + l]`. Every product is exact; products are
    /// added into a fixed-point window reaching `128 * limbs` bits below the
    /// largest product, and only bits below that window are discarded.
    pub(crate) fn dot(&mut self, a: &Packed, ia: usize, b: &Packed, ib: usize, n: usize) -> Float {
        let mut top = isize::MIN;
        for l in 0..n {
            let (x, y) = (ia + l, ib + l);
            if a.sign[x] != 0 && b.sign[y] != 0 {
                top = top.max(a.top[x] + b.top[y]);
            }
        }
        if top == isize::MIN {
            return Float::ZERO;
        }
        let width = self.pos.len();
        let base = top + 64 - 64 * width as isize;
        self.pos.fill(0);
        self.neg.fill(0);
        for l in 0..n {
            let (x, y) = (ia + l, ib + l);
            let s = a.sign[x] * b.sign[y];
            if s == 0 {
                continue;
            }
            let shift = a.exp[x] + b.exp[y] - base;
            if a.top[x] + b.top[y] <= base {
                continue;
            }
            let ma = a.mantissa(x);
            let mb = b.mantissa(y);
            let plen = ma.len() + mb.len();
            mul_into(&mut self.prod[..plen], ma, mb);
            let acc = if s > 0 { &mut self.pos } else { &mut self.neg };
            add_shifted(acc, &self.prod[..plen], shift);
        }
        let (sign, mag) = if ge(&self.pos, &self.neg) {
            sub_in_place(&mut self.pos, &self.neg);
            (Sign::Positive, UBig::from_words(&self.pos))
        } else {
            sub_in_place(&mut self.neg, &self.pos);
            (Sign::Negative, UBig::from_words(&self.neg))
        };
        let sig = IBig::from_parts(sign, mag);
        Float::from_parts(sig, base)
    }
}

fn mul_into(out: &mut [u64], a: &[u64], b: &[u64]) {
    out.fill(0);
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let ai = ai as u128;
        let mut carry: u128 = 0;
        for (j, &bj) in b.iter().enumerate() {
            let t = ai * bj as u128 + out[i + j] as u128 + carry;
            out[i + j] = t as u64;
            carry = t >> 64;
        }
        out[i + b.len()] = carry as u64;
    }
}

/// `acc += p * 2^shift`, dropping bits below position zero.
fn add_shifted(acc: &mut [u64], p: &[u64], shift: isize) {
    let word = |k: isize| -> u64 {
        if k < 0 || k as usize >= p.len() {
            0
        } else {
            p[k as usize]
        }
    };
    let q = shift.div_euclid(64);
    let r = shift.rem_euclid(64) as u32;
    // acc word i receives bits of p shifted: source words i - q and i - q - 1
    let first = q.max(0) as usize;
    let last = ((p.len() as isize + q + 1).max(0) as usize).min(acc.len());
    let mut carry = 0u64;
    let mut i = first;
    while i < last {
        let k = i as isize - q;
        let w = if r == 0 { word(k) } else { (word(k) << r) | (word(k - 1) >> (64 - r)) };
        let (s1, c1) = acc[i].overflowing_add(w);
        let (s2, c2) = s1.overflowing_add(carry);
        acc[i] = s2;
        carry = (c1 as u64) + (c2 as u64);
        i += 1;
    }
    while carry != 0 && i < acc.len() {
        let (s, c) = acc[i].overflowing_add(carry);
        acc[i] = s;
        carry = c as u64;
        i += 1;
    }
    debug_assert_eq!(carry, 0, "dot accumulator overflow");
}

fn ge(a: &[u64], b: &[u64]) -> bool {
    for i in (0..a.len()).rev() {
        if a[i] != b[i] {
            return a[i] > b[i];
        }
    }
    true
}

fn sub_in_place(a: &mut [u64], b: &[u64]) {
    let mut borrow = 0u64;
    for i in 0..a.len() {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        a[i] = d2;
        borrow = (b1 as u64) + (b2 as u64);
    }
}
