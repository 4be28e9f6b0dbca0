//! Independent oracles shared by the integration suites. Nothing here calls
//! into the library's hashing or serialization code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soapguard::xml::{Element, XmlNode};
use soapguard::{KeyStore, UnixTime};

pub const T0: UnixTime = UnixTime(1_172_750_400);

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn keystore() -> KeyStore {
    KeyStore::from_json(&String::from_utf8(fixture("keystore.json")).unwrap()).unwrap()
}

pub fn keystore_path() -> String {
    format!("{}/fixtures/keystore.json", env!("CARGO_MANIFEST_DIR"))
}

// ---- SHA-256 (FIPS 180-4), written out longhand ----

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98,
    0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8,
    0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
    0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2,
];

pub fn oracle_sha256(data: &[u8]) -> [u8; 32] {
    let mut h: [u32; 8] = [
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
    ];
    let mut msg = data.to_vec();
    let bit_len = (data.len() as u64).wrapping_mul(8);
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&bit_len.to_be_bytes());

    for block in msg.chunks(64) {
        let mut w = [0u32; 64];
        for t in 0..16 {
            w[t] = u32::from_be_bytes([block[4 * t], block[4 * t + 1], block[4 * t + 2], block[4 * t + 3]]);
        }
        for t in 16..64 {
            let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
            let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16].wrapping_add(s0).wrapping_add(w[t - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for t in 0..64 {
            let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh
                .wrapping_add(s1)
                .wrapping_add(ch)
                .wrapping_add(K[t])
                .wrapping_add(w[t]);
            let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (x, y) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *x = x.wrapping_add(y);
        }
    }
    let mut out = [0u8; 32];
    for (i, word) in h.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&word.to_be_bytes());
    }
    out
}

/// HMAC (RFC 2104) over [`oracle_sha256`].
pub fn oracle_hmac_sha256(key: &[u8], msg: &[u8]) -> [u8; 32] {
    let mut k = [0u8; 64];
    if key.len() > 64 {
        k[..32].copy_from_slice(&oracle_sha256(key));
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let mut inner: Vec<u8> = k.iter().map(|b| b ^ 0x36).collect();
    inner.extend_from_slice(msg);
    let mut outer: Vec<u8> = k.iter().map(|b| b ^ 0x5c).collect();
    outer.extend_from_slice(&oracle_sha256(&inner));
    oracle_sha256(&outer)
}

// ---- canonical form, from its written description ----

fn escape(s: &str, quote: bool) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', if quote { "&quot;" } else { "\"" })
}

pub fn oracle_canonical(el: &Element) -> Vec<u8> {
    fn go(el: &Element, out: &mut Vec<u8>) {
        let attrs: BTreeMap<&str, &str> = el.attributes.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        out.extend(format!("<{}", el.name).bytes());
        for (k, v) in attrs {
            out.extend(format!(" {k}=\"{}\"", escape(v, true)).bytes());
        }
        out.push(b'>');
        for c in &el.children {
            match c {
                XmlNode::Element(e) => go(e, out),
                XmlNode::Text(t) => out.extend(escape(t, false).bytes()),
            }
        }
        out.extend(format!("</{}>", el.name).bytes());
    }
    let mut out = Vec::new();
    go(el, &mut out);
    out
}

// ---- random trees ----

const NAMES: &[&str] = &["a", "b", "Body", "item", "ns:x", "wsse:Sec", "data-1", "_q", "Z.z"];
const ATTRS: &[&str] = &["Id", "id", "wsu:Id", "role", "k", "x:y", "ref"];
const TEXT: &[&str] = &[
    "5<6",
    "a & b",
    "\"q\" 'r'",
    "x > y",
    " pad ",
    "é ü 漢",
    "plain",
    "&amp;",
    "0",
];

/// Random element tree: unique attribute names in sorted order, no whitespace-only text and
/// no adjacent text nodes, so it survives a serialize/parse round trip.
pub fn random_tree(rng: &mut impl Rng, depth: usize) -> Element {
    let mut el = Element::new(NAMES[rng.random_range(0..NAMES.len())]);
    let mut used = Vec::new();
    for _ in 0..rng.random_range(0..3) {
        let name = ATTRS[rng.random_range(0..ATTRS.len())];
        if !used.contains(&name) {
            used.push(name);
            el.attributes
                .push((name.to_string(), TEXT[rng.random_range(0..TEXT.len())].to_string()));
        }
    }
    el.attributes.sort();
    let children = if depth == 0 { 0 } else { rng.random_range(0..4) };
    let mut last_text = false;
    for _ in 0..children {
        if !last_text && rng.random_bool(0.3) {
            el.children
                .push(XmlNode::Text(TEXT[rng.random_range(0..TEXT.len())].to_string()));
            last_text = true;
        } else {
            el.children.push(XmlNode::Element(random_tree(rng, depth - 1)));
            last_text = false;
        }
    }
    el
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
