//! Build-id notes and printable strings from 64-bit little-endian ELF files.

use std::collections::BTreeSet;
use std::fmt;

use object::elf;
use object::read::elf::{FileHeader, ProgramHeader, SectionHeader};
use object::LittleEndian;
use serde::{Deserialize, Serialize};

use super::ForensicsError;

type Header = elf::FileHeader64<LittleEndian>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BuildId {
    pub bytes: Vec<u8>,
}

impl BuildId {
    pub fn hex(&self) -> String {
        self.bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for BuildId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

fn malformed(m: impl fmt::Display) -> ForensicsError {
    ForensicsError::MalformedElf(m.to_string())
}

fn header(data: &[u8]) -> Result<&Header, ForensicsError> {
    if data.len() < 64 {
        return Err(malformed(format!("{} bytes is too short for an ELF64 header", data.len())));
    }
    if data[..4] != elf::ELFMAG {
        return Err(malformed("bad magic"));
    }
    match data[4] {
        elf::ELFCLASS64 => {}
        elf::ELFCLASS32 => return Err(malformed("32-bit ELF is not supported")),
        c => return Err(malformed(format!("unknown ELF class {c}"))),
    }
    if data[5] != elf::ELFDATA2LSB {
        return Err(malformed("only little-endian ELF is supported"));
    }
    Header::parse(data).map_err(malformed)
}

fn gnu_build_id(mut notes: object::read::elf::NoteIterator<'_, Header>) -> Result<Option<BuildId>, ForensicsError> {
    while let Some(n) = notes.next().map_err(malformed)? {
        if n.name() == elf::ELF_NOTE_GNU && n.n_type(LittleEndian) == elf::NT_GNU_BUILD_ID {
            return Ok(Some(BuildId { bytes: n.desc().to_vec() }));
        }
    }
    Ok(None)
}

/// Section notes first, then `PT_NOTE` segments for files without
/// section headers.
pub fn extract_build_id(data: &[u8]) -> Result<BuildId, ForensicsError> {
    let h = header(data)?;
    let e = LittleEndian;
    let sections = h.sections(e, data).map_err(malformed)?;
    for s in sections.iter() {
        if let Some(notes) = s.notes(e, data).map_err(malformed)? {
            if let Some(id) = gnu_build_id(notes)? {
                return Ok(id);
            }
        }
    }
    for p in h.program_headers(e, data).map_err(malformed)? {
        if let Some(notes) = p.notes(e, data).map_err(malformed)? {
            if let Some(id) = gnu_build_id(notes)? {
                return Ok(id);
            }
        }
    }
    Err(ForensicsError::NotFound)
}

fn printable(b: u8) -> bool {
    b == b'\t' || (0x20..0x7f).contains(&b)
}

fn runs(bytes: &[u8], min_len: usize, out: &mut BTreeSet<String>) {
    for run in bytes.split(|b| !printable(*b)) {
        if run.len() >= min_len {
            out.insert(String::from_utf8_lossy(run).into_owned());
        }
    }
}

/// Maximal printable ASCII runs (tab included) in loaded sections with
/// file contents, scanned section by section. Files without section
/// headers fall back to `PT_LOAD` segments.
pub fn extract_strings(data: &[u8], min_len: usize) -> Result<BTreeSet<String>, ForensicsError> {
    let h = header(data)?;
    let e = LittleEndian;
    let min_len = min_len.max(1);
    let mut out = BTreeSet::new();
    let sections = h.sections(e, data).map_err(malformed)?;
    if !sections.is_empty() {
        for s in sections.iter() {
            let loaded = s.sh_flags(e) & u64::from(elf::SHF_ALLOC) != 0;
            if loaded && s.sh_type(e) != elf::SHT_NOBITS {
                runs(s.data(e, data).map_err(malformed)?, min_len, &mut out);
            }
        }
    } else {
        for p in h.program_headers(e, data).map_err(malformed)? {
            if p.p_type(e) == elf::PT_LOAD {
                runs(p.data(e, data).map_err(|_| malformed("segment outside the file"))?, min_len, &mut out);
            }
        }
    }
    Ok(out)
}
