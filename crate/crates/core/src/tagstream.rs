//! Binary per-station time-tag stream format, reader and writer.
//!
//! Each station stores its detections independently; analysis happens later
//! from the two files alone. The format is bit-exact and little-endian:
//!
//! ```text
//! header, 31 bytes
//!   offset  0..8    magic, b"BELLTAG1"
//!   offset  8..10   version, u16
//!   offset 10       station_id, u8 (0 = Alice, 1 = Bob)
//!   offset 11..15   tick_unit, u32, picoseconds per timestamp tick
//!   offset 15..23   start_time, u64, ticks (informational)
//!   offset 23..31   record_count, u64; 0 means "records until EOF"
//! records, 9 bytes each, packed
//!   offset  0..8    timestamp, u64, ticks, non-decreasing within a file
//!   offset  8       flags: bit0 = setting, bit1 = detector (0 = "+",
//!                   1 = "−"), bits 2..7 reserved, must be zero
//! ```
//!
//! The `record_count = 0` sentinel lets a writer stream records without
//! seeking back to patch the header; readers accept both forms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::quantum::Outcome;
use crate::station::TimeTag;

pub const MAGIC: [u8; 8] = *b"BELLTAG1";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 31;
pub const RECORD_LEN: usize = 9;
pub const DEFAULT_TICK_UNIT_PS: u32 = 75;

pub const STATION_ALICE: u8 = 0;
pub const STATION_BOB: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u16,
    pub station_id: u8,
    /// Picoseconds per timestamp tick.
    pub tick_unit_ps: u32,
    /// Nominal run start on the local clock, in ticks.
    pub start_time: u64,
    /// Number of records, or 0 for "until EOF".
    pub record_count: u64,
}

impl StreamHeader {
    pub fn new(station_id: u8, tick_unit_ps: u32) -> StreamHeader {
        StreamHeader {
            version: FORMAT_VERSION,
            station_id,
            tick_unit_ps,
            start_time: 0,
            record_count: 0,
        }
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&MAGIC);
        out[8..10].copy_from_slice(&self.version.to_le_bytes());
        out[10] = self.station_id;
        out[11..15].copy_from_slice(&self.tick_unit_ps.to_le_bytes());
        out[15..23].copy_from_slice(&self.start_time.to_le_bytes());
        out[23..31].copy_from_slice(&self.record_count.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8; HEADER_LEN]) -> Result<StreamHeader> {
        if bytes[0..8] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != FORMAT_VERSION {
            return Err(Error::BadVersion(version));
        }
        let tick_unit_ps = u32::from_le_bytes(bytes[11..15].try_into().unwrap());
        if tick_unit_ps == 0 {
            return Err(Error::InvalidConfig("tick_unit must be > 0".into()));
        }
        Ok(StreamHeader {
            version,
            station_id: bytes[10],
            tick_unit_ps,
            start_time: u64::from_le_bytes(bytes[15..23].try_into().unwrap()),
            record_count: u64::from_le_bytes(bytes[23..31].try_into().unwrap()),
        })
    }
}

/// One on-disk tag record. Timestamps are in header tick units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagRecord {
    pub timestamp: u64,
    pub setting: u8,
    pub detector: Outcome,
}

impl TagRecord {
    pub fn encode(&self) -> [u8; RECORD_LEN] {
        let mut out = [0u8; RECORD_LEN];
        out[0..8].copy_from_slice(&self.timestamp.to_le_bytes());
        out[8] = (self.setting & 1) | (self.detector.flag_bit() << 1);
        out
    }

    pub fn decode(bytes: &[u8; RECORD_LEN], index: u64) -> Result<TagRecord> {
        let flags = bytes[8];
        if flags & !0b11 != 0 {
            return Err(Error::ReservedBits { index, flags });
        }
        Ok(TagRecord {
            timestamp: u64::from_le_bytes(bytes[0..8].try_into().unwrap()),
            setting: flags & 1,
            detector: Outcome::from_flag_bit((flags >> 1) & 1),
        })
    }

    /// Convert an in-memory picosecond tag to tick units. The timestamp must
    /// be nonnegative and on the tick grid.
    pub fn from_time_tag(tag: &TimeTag, tick_unit_ps: u32) -> Result<TagRecord> {
        if tag.timestamp_ps < 0 {
            return Err(Error::NegativeTimestamp {
                ts_ps: tag.timestamp_ps,
            });
        }
        let unit = tick_unit_ps as i64;
        if tag.timestamp_ps % unit != 0 {
            return Err(Error::OffGrid {
                ts_ps: tag.timestamp_ps,
                tick_unit_ps,
            });
        }
        Ok(TagRecord {
            timestamp: (tag.timestamp_ps / unit) as u64,
            setting: tag.setting & 1,
            detector: tag.detector,
        })
    }

    pub fn to_time_tag(&self, tick_unit_ps: u32) -> TimeTag {
        TimeTag {
            timestamp_ps: self.timestamp as i64 * tick_unit_ps as i64,
            setting: self.setting,
            detector: self.detector,
        }
    }
}

/// Write a complete stream. The header's `record_count` must be either 0
/// (kept as the streaming sentinel) or exactly `records.len()`. Identical
/// input produces byte-identical output.
pub fn write_stream<W: Write>(
    w: &mut W,
    header: &StreamHeader,
    records: &[TagRecord],
) -> Result<()> {
    if header.record_count != 0 && header.record_count != records.len() as u64 {
        return Err(Error::InvalidConfig(format!(
            "header record_count {} does not match {} records",
            header.record_count,
            records.len()
        )));
    }
    w.write_all(&header.encode())?;
    let mut prev: Option<u64> = None;
    for (i, rec) in records.iter().enumerate() {
        if let Some(p) = prev {
            if rec.timestamp < p {
                return Err(Error::UnsortedStream { index: i });
            }
        }
        prev = Some(rec.timestamp);
        w.write_all(&rec.encode())?;
    }
    Ok(())
}

/// Streaming reader: validates the header eagerly and each record lazily, in
/// constant memory.
#[derive(Debug)]
pub struct StreamReader<R: Read> {
    inner: R,
    header: StreamHeader,
    index: u64,
    prev: Option<u64>,
    done: bool,
}

impl<R: Read> StreamReader<R> {
    pub fn new(mut inner: R) -> Result<StreamReader<R>> {
        let mut buf = [0u8; HEADER_LEN];
        read_exact_or_offset(&mut inner, &mut buf, 0).map_err(|e| match e {
            Error::Truncated { .. } => Error::Truncated { index: 0, offset: 0 },
            other => other,
        })?;
        let header = StreamHeader::decode(&buf)?;
        Ok(StreamReader {
            inner,
            header,
            index: 0,
            prev: None,
            done: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

/// read_exact that reports how many bytes were read before EOF.
fn read_exact_or_offset<R: Read>(r: &mut R, buf: &mut [u8], base_offset: u64) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(0);
            }
            return Err(Error::Truncated {
                index: 0,
                offset: base_offset + filled as u64,
            });
        }
        filled += n;
    }
    Ok(filled)
}

impl<R: Read> Iterator for StreamReader<R> {
    type Item = Result<TagRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.header.record_count != 0 && self.index == self.header.record_count {
            self.done = true;
            return None;
        }
        let offset = HEADER_LEN as u64 + self.index * RECORD_LEN as u64;
        let mut buf = [0u8; RECORD_LEN];
        match read_exact_or_offset(&mut self.inner, &mut buf, offset) {
            Ok(0) => {
                self.done = true;
                if self.header.record_count != 0 {
                    // promised more records than the file holds
                    return Some(Err(Error::Truncated {
                        index: self.index,
                        offset,
                    }));
                }
                None
            }
            Ok(_) => {
                let rec = match TagRecord::decode(&buf, self.index) {
                    Ok(r) => r,
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                };
                if let Some(p) = self.prev {
                    if rec.timestamp < p {
                        self.done = true;
                        return Some(Err(Error::NonMonotonic {
                            index: self.index,
                            ts: rec.timestamp,
                            prev: p,
                        }));
                    }
                }
                self.prev = Some(rec.timestamp);
                self.index += 1;
                Some(Ok(rec))
            }
            Err(Error::Truncated { offset, .. }) => {
                self.done = true;
                Some(Err(Error::Truncated {
                    index: self.index,
                    offset,
                }))
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Read a whole stream into memory.
pub fn read_to_vec<R: Read>(r: R) -> Result<(StreamHeader, Vec<TagRecord>)> {
    let reader = StreamReader::new(r)?;
    let header = *reader.header();
    let mut records = Vec::new();
    for rec in reader {
        records.push(rec?);
    }
    Ok((header, records))
}

pub fn write_file<P: AsRef<Path>>(
    path: P,
    header: &StreamHeader,
    records: &[TagRecord],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_stream(&mut w, header, records)?;
    w.flush()?;
    Ok(())
}

pub fn read_file<P: AsRef<Path>>(path: P) -> Result<(StreamHeader, Vec<TagRecord>)> {
    read_to_vec(BufReader::new(File::open(path)?))
}

pub fn open_file<P: AsRef<Path>>(path: P) -> Result<StreamReader<BufReader<File>>> {
    StreamReader::new(BufReader::new(File::open(path)?))
}

/// Convert a station's in-memory tags to disk records.
pub fn tags_to_records(tags: &[TimeTag], tick_unit_ps: u32) -> Result<Vec<TagRecord>> {
    tags.iter()
        .map(|t| TagRecord::from_time_tag(t, tick_unit_ps))
        .collect()
}

/// Convert disk records back to picosecond tags.
pub fn records_to_tags(records: &[TagRecord], tick_unit_ps: u32) -> Vec<TimeTag> {
    records.iter().map(|r| r.to_time_tag(tick_unit_ps)).collect()
}

/// Plain-text export for debugging: one `ticks,setting,detector` line per
/// record, CSV-compatible.
pub fn write_text<W: Write>(w: &mut W, records: &[TagRecord]) -> Result<()> {
    writeln!(w, "ticks,setting,detector")?;
    for rec in records {
        writeln!(w, "{},{},{}", rec.timestamp, rec.setting, rec.detector.symbol())?;
    }
    Ok(())
}
