use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DirectoryEntry;

/// One line of the journal: an entry as registered, or a removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JournalRecord {
    Remove { remove: String },
    Entry(Box<DirectoryEntry>),
}

/// Append-only JSON-lines log, replayed on start.
pub struct Journal {
    file: File,
}

impl Journal {
    /// Returns the journal and its existing records. A torn final line
    /// (from a crash mid-write) is skipped.
    pub fn open(path: &Path) -> io::Result<(Journal, Vec<JournalRecord>)> {
        let mut records = Vec::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?)
                .lines()
                .collect::<Result<_, _>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(line) {
                    Ok(r) => records.push(r),
                    Err(_) if i == last => {}
                    Err(e) => {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("line {}: {e}", i + 1),
                        ))
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((Journal { file }, records))
    }

    pub fn append(&mut self, record: &JournalRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }
}
