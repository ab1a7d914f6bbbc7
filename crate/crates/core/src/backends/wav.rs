//! Minimal RIFF/WAVE support for 16-bit PCM mono fixtures.
//!
//! Fixture audio stores its transcript in a `LIST`/`INFO` chunk under the
//! `ICMT` (comment) key, which is how the stub recognizer "hears" it.

use std::io;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmAudio {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
    /// Transcript carried in the file's INFO comment, if any.
    pub tag: Option<String>,
}

impl PcmAudio {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Self {
        PcmAudio {
            samples,
            sample_rate,
            tag: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn duration_secs(&self) -> f64 {
        if self.sample_rate == 0 {
            return 0.0;
        }
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// A fixture clip: `seconds` of a quiet 220 Hz tone tagged with
    /// `transcript`.
    pub fn fixture(transcript: &str, seconds: f64, sample_rate: u32) -> Self {
        let n = (seconds * sample_rate as f64).round() as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sample_rate as f64;
                ((t * 220.0 * std::f64::consts::TAU).sin() * 3000.0) as i16
            })
            .collect();
        PcmAudio::new(samples, sample_rate).with_tag(transcript)
    }

    pub fn to_wav_bytes(&self) -> Vec<u8> {
        let data_len = (self.samples.len() * 2) as u32;
        let list = self.tag.as_ref().map(|tag| {
            let mut text = tag.as_bytes().to_vec();
            text.push(0);
            let sub_len = text.len() as u32;
            if text.len() % 2 == 1 {
                text.push(0);
            }
            let mut list = Vec::with_capacity(12 + text.len());
            list.extend_from_slice(b"INFO");
            list.extend_from_slice(b"ICMT");
            list.extend_from_slice(&sub_len.to_le_bytes());
            list.extend_from_slice(&text);
            list
        });
        let list_total = list.as_ref().map_or(0, |l| 8 + l.len() as u32);
        let riff_len = 4 + (8 + 16) + list_total + 8 + data_len;

        let mut out = Vec::with_capacity(riff_len as usize + 8);
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&riff_len.to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes()); // PCM
        out.extend_from_slice(&1u16.to_le_bytes()); // mono
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.sample_rate * 2).to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        if let Some(list) = list {
            out.extend_from_slice(b"LIST");
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            out.extend_from_slice(&list);
        }
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_owned());
        if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
            return Err(bad("not a RIFF/WAVE file"));
        }
        let mut pos = 12;
        let mut sample_rate = None;
        let mut samples = None;
        let mut tag = None;
        while pos + 8 <= bytes.len() {
            let id = &bytes[pos..pos + 4];
            let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
            let body_start = pos + 8;
            let body_end = body_start
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| bad("chunk overruns file"))?;
            let body = &bytes[body_start..body_end];
            match id {
                b"fmt " => {
                    if body.len() < 16 {
                        return Err(bad("short fmt chunk"));
                    }
                    let format = u16::from_le_bytes([body[0], body[1]]);
                    let channels = u16::from_le_bytes([body[2], body[3]]);
                    let bits = u16::from_le_bytes([body[14], body[15]]);
                    if format != 1 || channels != 1 || bits != 16 {
                        return Err(bad("only 16-bit PCM mono is supported"));
                    }
                    sample_rate = Some(u32::from_le_bytes(body[4..8].try_into().unwrap()));
                }
                b"data" => {
                    samples = Some(
                        body.chunks_exact(2)
                            .map(|b| i16::from_le_bytes([b[0], b[1]]))
                            .collect::<Vec<_>>(),
                    );
                }
                b"LIST" if body.len() >= 4 && &body[0..4] == b"INFO" => {
                    tag = parse_info_comment(&body[4..]);
                }
                _ => {}
            }
            pos = body_end + (len % 2);
        }
        Ok(PcmAudio {
            samples: samples.ok_or_else(|| bad("missing data chunk"))?,
            sample_rate: sample_rate.ok_or_else(|| bad("missing fmt chunk"))?,
            tag,
        })
    }
}

fn parse_info_comment(mut info: &[u8]) -> Option<String> {
    while info.len() >= 8 {
        let key = &info[0..4];
        let len = u32::from_le_bytes(info[4..8].try_into().unwrap()) as usize;
        let end = (8 + len).min(info.len());
        let value = &info[8..end];
        if key == b"ICMT" {
            let text = value.split(|&b| b == 0).next().unwrap_or(&[]);
            return String::from_utf8(text.to_vec()).ok();
        }
        info = &info[(end + (len % 2)).min(info.len())..];
    }
    None
}
