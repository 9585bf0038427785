//! FNV-1a 64 over a tag-prefixed canonical encoding of values.

use crate::runtime::{ArrayData, Heap, HeapObj, Ref, Value};
use std::collections::HashMap;

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const TAG_INT: u8 = 0x01;
pub const TAG_DOUBLE: u8 = 0x02;
pub const TAG_BOOL: u8 = 0x03;
pub const TAG_CHAR: u8 = 0x04;
pub const TAG_ARRAY: u8 = 0x05;
pub const TAG_RECORD: u8 = 0x06;
pub const TAG_NULL: u8 = 0x07;
pub const TAG_UNIT: u8 = 0x08;
pub const TAG_TRAP: u8 = 0x09;
pub const TAG_BACKREF: u8 = 0x0a;

pub const CANONICAL_NAN: u64 = 0x7ff8_0000_0000_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checksum(u64);

impl Default for Checksum {
    fn default() -> Self {
        Checksum(FNV_OFFSET)
    }
}

impl Checksum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> u64 {
        self.0
    }

    #[inline]
    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(FNV_PRIME);
    }

    fn bytes(&mut self, bs: &[u8]) {
        for &b in bs {
            self.byte(b);
        }
    }

    fn int(&mut self, v: i32) {
        self.byte(TAG_INT);
        self.bytes(&v.to_be_bytes());
    }

    fn double(&mut self, v: f64) {
        self.byte(TAG_DOUBLE);
        let bits = if v.is_nan() { CANONICAL_NAN } else { v.to_bits() };
        self.bytes(&bits.to_be_bytes());
    }

    fn char(&mut self, v: u16) {
        self.byte(TAG_CHAR);
        self.bytes(&v.to_be_bytes());
    }

    /// Hashes one value, following references through the heap. A reference
    /// seen earlier in the same update hashes as a back-reference to the
    /// ordinal of its first visit.
    pub fn update(&mut self, v: Value, heap: &Heap) {
        let mut seen = HashMap::new();
        self.value_rec(v, heap, &mut seen);
    }

    fn value_rec(&mut self, v: Value, heap: &Heap, seen: &mut HashMap<Ref, u32>) {
        match v {
            Value::Int(x) => self.int(x),
            Value::Double(x) => self.double(x),
            Value::Bool(b) => {
                self.byte(TAG_BOOL);
                self.byte(b as u8);
            }
            Value::Char(c) => self.char(c),
            Value::Null => self.byte(TAG_NULL),
            Value::Unit => self.byte(TAG_UNIT),
            Value::Array(r) | Value::Record(r) => {
                if let Some(&ord) = seen.get(&r) {
                    self.byte(TAG_BACKREF);
                    self.bytes(&ord.to_be_bytes());
                    return;
                }
                let ord = seen.len() as u32;
                seen.insert(r, ord);
                match heap.get(r) {
                    HeapObj::Array(a) => {
                        self.byte(TAG_ARRAY);
                        self.bytes(&(a.len() as u32).to_be_bytes());
                        match a {
                            ArrayData::Int(xs) => xs.iter().for_each(|&x| self.int(x)),
                            ArrayData::Double(xs) => xs.iter().for_each(|&x| self.double(x)),
                            ArrayData::Char(xs) => xs.iter().for_each(|&x| self.char(x)),
                        }
                    }
                    HeapObj::Record { fields, .. } => {
                        self.byte(TAG_RECORD);
                        self.bytes(&(fields.len() as u32).to_be_bytes());
                        for f in fields.clone() {
                            self.value_rec(f, heap, seen);
                        }
                    }
                }
            }
        }
    }

    /// Hashes a trap kind name (the catch path of the driver).
    pub fn update_name(&mut self, name: &str) {
        self.byte(TAG_TRAP);
        self.bytes(&(name.len() as u32).to_be_bytes());
        self.bytes(name.as_bytes());
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.0)
    }
}
