//! Episodic memory backed by a Kanerva sparse distributed memory.
//!
//! Episodes are encoded as XOR combinations of per-field hash masks. They are
//! stored hetero-associatively: the address is the encoding of the episode's
//! context alone and the stored word is the full episode encoding, so a
//! context cue lands on the hard locations the episode was written to. A
//! small prototype codebook turns the recovered word back into a symbolic
//! episode.
//!
//! Snapshot layout (little endian):
//!
//! ```text
//! u8   version (= 1)
//! u32  n            word length in bits
//! u32  M            hard location count
//! u32  radius
//! u16  counter max
//! M × ceil(n/8) bytes   addresses, bit i at byte i/8, bit position i%8
//! M × n  i8             counters, location-major
//! ```

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::context_band;
use crate::service::{Premise, PremiseSet, QoSVector, ServiceId};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVector { words: vec![u64::MAX; len.div_ceil(64)], len };
        v.mask_tail();
        v
    }

    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        let mut v = BitVector { words: (0..len.div_ceil(64)).map(|_| rng.gen()).collect(), len };
        v.mask_tail();
        v
    }

    /// Deterministic pseudo-random vector derived from `seed`.
    pub fn from_seed(len: usize, seed: u64) -> Self {
        let mut state = seed;
        let mut v = BitVector { words: (0..len.div_ceil(64)).map(|_| splitmix64(&mut state)).collect(), len };
        v.mask_tail();
        v
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        if bit {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn hamming(&self, other: &BitVector) -> u32 {
        assert_eq!(self.len, other.len, "bit vectors differ in length");
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones()).sum()
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn complement(&self) -> BitVector {
        let mut v = BitVector { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        v.mask_tail();
        v
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    fn to_bytes(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|b| (self.words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect()
    }

    fn from_bytes(len: usize, bytes: &[u8]) -> Self {
        let mut v = BitVector::zeros(len);
        for (b, byte) in bytes.iter().enumerate() {
            v.words[b / 8] |= (*byte as u64) << ((b % 8) * 8);
        }
        v.mask_tail();
        v
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn field_mask(n: usize, field: &str, value: &str) -> BitVector {
    BitVector::from_seed(n, stable_hash(format!("{field}={value}").as_bytes()))
}

/// Smallest radius whose binomial(n, 1/2) lower tail reaches `fraction`.
pub fn radius_for_fraction(n: usize, fraction: f64) -> u32 {
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut ln_choose = 0.0f64;
    let mut cdf = 0.0f64;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        cdf += (ln_choose - ln2n).exp();
        if cdf >= fraction {
            return k as u32;
        }
    }
    n as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdmConfig {
    pub word_bits: usize,
    pub locations: usize,
    /// Explicit access radius; derived from `activation_fraction` when absent.
    pub radius: Option<u32>,
    pub activation_fraction: f64,
    pub counter_max: i16,
    pub seed: u64,
}

impl Default for SdmConfig {
    fn default() -> Self {
        SdmConfig { word_bits: 256, locations: 1000, radius: None, activation_fraction: 0.001, counter_max: 127, seed: 0x5D11 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardLocation {
    pub address: BitVector,
    pub counters: Vec<i16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sdm {
    n: usize,
    radius: u32,
    counter_max: i16,
    locations: Vec<HardLocation>,
    /// Writes that found no hard location inside the radius.
    pub empty_writes: u64,
}

impl Sdm {
    pub fn new(config: &SdmConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let addresses = (0..config.locations).map(|_| BitVector::random(config.word_bits, &mut rng)).collect();
        let radius = config
            .radius
            .unwrap_or_else(|| radius_for_fraction(config.word_bits, config.activation_fraction));
        Sdm::with_addresses(config.word_bits, radius, config.counter_max, addresses)
    }

    pub fn with_addresses(n: usize, radius: u32, counter_max: i16, addresses: Vec<BitVector>) -> Self {
        let locations = addresses
            .into_iter()
            .map(|address| {
                assert_eq!(address.len(), n);
                HardLocation { address, counters: vec![0; n] }
            })
            .collect();
        Sdm { n, radius, counter_max, locations, empty_writes: 0 }
    }

    pub fn word_bits(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn counter_max(&self) -> i16 {
        self.counter_max
    }

    pub fn locations(&self) -> &[HardLocation] {
        &self.locations
    }

    /// Indices of hard locations within the radius of `address`.
    pub fn activated(&self, address: &BitVector) -> Vec<usize> {
        self.locations
            .iter()
            .enumerate()
            .filter(|(_, loc)| loc.address.hamming(address) <= self.radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Returns the indices of the locations written.
    pub fn write(&mut self, address: &BitVector, word: &BitVector) -> Vec<usize> {
        assert_eq!(word.len(), self.n);
        let hit = self.activated(address);
        if hit.is_empty() {
            self.empty_writes += 1;
        }
        let max = self.counter_max;
        for &idx in &hit {
            for (i, c) in self.locations[idx].counters.iter_mut().enumerate() {
                *c = if word.get(i) { (*c + 1).min(max) } else { (*c - 1).max(-max) };
            }
        }
        hit
    }

    /// Majority read; a zero sum reads as 0.
    pub fn read(&self, address: &BitVector) -> BitVector {
        let mut sums = vec![0i64; self.n];
        for idx in self.activated(address) {
            for (s, c) in sums.iter_mut().zip(&self.locations[idx].counters) {
                *s += *c as i64;
            }
        }
        let mut out = BitVector::zeros(self.n);
        for (i, s) in sums.iter().enumerate() {
            if *s > 0 {
                out.set(i, true);
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![1u8];
        out.extend((self.n as u32).to_le_bytes());
        out.extend((self.locations.len() as u32).to_le_bytes());
        out.extend(self.radius.to_le_bytes());
        out.extend((self.counter_max as u16).to_le_bytes());
        for loc in &self.locations {
            out.extend(loc.address.to_bytes());
        }
        for loc in &self.locations {
            out.extend(loc.counters.iter().map(|c| *c as i8 as u8));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Snapshot(m.to_string());
        let mut at = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            let s = bytes.get(at..at + k).ok_or_else(|| err("truncated"))?;
            at += k;
            Ok(s)
        };
        if take(1)?[0] != 1 {
            return Err(err("unsupported version"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let n = u32_at(take(4)?) as usize;
        let m = u32_at(take(4)?) as usize;
        let radius = u32_at(take(4)?);
        let counter_max = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as i16;
        if counter_max > 127 {
            return Err(err("counter max does not fit in i8"));
        }
        let stride = n.div_ceil(8);
        let mut addresses = Vec::with_capacity(m);
        for _ in 0..m {
            addresses.push(BitVector::from_bytes(n, take(stride)?));
        }
        let mut sdm = Sdm::with_addresses(n, radius, counter_max, addresses);
        for loc in sdm.locations.iter_mut() {
            let raw = take(n)?;
            loc.counters = raw.iter().map(|b| *b as i8 as i16).collect();
        }
        if at != bytes.len() {
            return Err(err("trailing bytes"));
        }
        Ok(sdm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Failure,
    Timeout,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicRecord {
    pub service: ServiceId,
    pub context: BTreeMap<String, String>,
    pub outcome: Outcome,
    pub observed_qos: QoSVector,
    pub time: f64,
}

/// Width of an episode time band, in simulated seconds.
pub const TIME_BAND_SECONDS: f64 = 600.0;

/// Numeric context values in [0,1] are banded; everything else is kept verbatim.
fn band_value(raw: &str) -> String {
    match raw.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => context_band(v),
        _ => raw.to_string(),
    }
}

fn context_mask(n: usize, context: &BTreeMap<String, String>) -> BitVector {
    let mut v = BitVector::zeros(n);
    for (k, raw) in context {
        v.xor_assign(&field_mask(n, &format!("ctx.{k}"), &band_value(raw)));
    }
    v
}

/// Deterministic XOR encoding of an episode.
pub fn encode_episode(rec: &EpisodicRecord, n: usize) -> BitVector {
    let mut v = context_mask(n, &rec.context);
    v.xor_assign(&field_mask(n, "service", rec.service.as_str()));
    v.xor_assign(&field_mask(n, "outcome", rec.outcome.label()));
    let band = (rec.time.max(0.0) / TIME_BAND_SECONDS).floor() as u64;
    v.xor_assign(&field_mask(n, "time", &band.to_string()));
    v
}

/// Address an episode is stored at and cued from.
pub fn encode_context(context: &BTreeMap<String, String>, n: usize) -> BitVector {
    context_mask(n, context)
}

/// Label of a context band, usable as a premise argument.
pub fn context_label(context: &BTreeMap<String, String>) -> String {
    if context.is_empty() {
        return "none".into();
    }
    context
        .iter()
        .map(|(k, v)| format!("{k}.{}", band_value(v)))
        .collect::<Vec<_>>()
        .join("+")
}

pub fn performed_well(service: &ServiceId, band: &str) -> Premise {
    Premise::new("performed_well", [service.as_str(), band])
}

/// Context attributes carried by `ctx(key, band)` premises.
pub fn context_from_premises<'a>(premises: impl IntoIterator<Item = &'a Premise>) -> BTreeMap<String, String> {
    premises
        .into_iter()
        .filter(|p| p.predicate() == "ctx" && p.args().len() == 2)
        .map(|p| (p.args()[0].clone(), p.args()[1].clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Prototype {
    vector: BitVector,
    service: ServiceId,
    band: String,
    outcome: Outcome,
    reliability_sum: f64,
    count: u32,
}

/// Fraction of `n` beyond which a decoded word is treated as unrecognized.
pub const DECODE_DISTANCE_FRACTION: f64 = 0.35;

#[derive(Debug, Clone)]
pub struct EpisodicMemory {
    sdm: Sdm,
    codebook: Vec<Prototype>,
    touched: BTreeSet<usize>,
}

impl EpisodicMemory {
    pub fn new(config: &SdmConfig) -> Self {
        EpisodicMemory { sdm: Sdm::new(config), codebook: Vec::new(), touched: BTreeSet::new() }
    }

    pub fn from_sdm(sdm: Sdm) -> Self {
        EpisodicMemory { sdm, codebook: Vec::new(), touched: BTreeSet::new() }
    }

    pub fn sdm(&self) -> &Sdm {
        &self.sdm
    }

    pub fn store(&mut self, rec: &EpisodicRecord) {
        let n = self.sdm.word_bits();
        let word = encode_episode(rec, n);
        let hit = self.sdm.write(&encode_context(&rec.context, n), &word);
        self.touched.extend(hit);
        let band = context_label(&rec.context);
        match self.codebook.iter_mut().find(|p| p.vector == word) {
            Some(p) => {
                p.reliability_sum += rec.observed_qos.reliability;
                p.count += 1;
            }
            None => self.codebook.push(Prototype {
                vector: word,
                service: rec.service.clone(),
                band,
                outcome: rec.outcome,
                reliability_sum: rec.observed_qos.reliability,
                count: 1,
            }),
        }
    }

    /// Cues with the `ctx(..)` premises of `wm_context`.
    pub fn cue(&self, wm_context: &PremiseSet) -> PremiseSet {
        let mut out = PremiseSet::new();
        if self.codebook.is_empty() {
            return out;
        }
        let n = self.sdm.word_bits();
        let context = context_from_premises(wm_context);
        let recalled = self.sdm.read(&encode_context(&context, n));
        let nearest = self
            .codebook
            .iter()
            .map(|p| (p.vector.hamming(&recalled), p))
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.service.cmp(&b.1.service)));
        if let Some((dist, proto)) = nearest {
            let reliability = proto.reliability_sum / proto.count as f64;
            if (dist as f64) <= n as f64 * DECODE_DISTANCE_FRACTION
                && proto.outcome == Outcome::Success
                && reliability >= 0.5
            {
                out.insert(performed_well(&proto.service, &proto.band));
            }
        }
        out
    }

    pub fn prototypes(&self) -> usize {
        self.codebook.len()
    }

    /// Hard locations written since the last [`EpisodicMemory::reset_touched`].
    pub fn touched(&self) -> usize {
        self.touched.len()
    }

    pub fn reset_touched(&mut self) {
        self.touched.clear();
    }
}
