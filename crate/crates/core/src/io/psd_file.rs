//! CSV spectrum container with `# key=value` provenance lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{format_err, io_err};
use crate::error::{CoshError, Result};
use crate::psd::{BinFlag, Psd, PsdBin, PsdKind, PsdMeta};

pub const PSD_SCHEMA_VERSION: u32 = 1;

const COLUMNS: [&str; 5] = ["freq_hz", "value", "band_index", "n_avg", "spur_flag"];

pub fn write_psd(path: &Path, psd: &Psd) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_psd_to(&mut w, psd, path)?;
    w.flush().map_err(io_err(path))
}

/// Serializes `psd`; `path` only labels error messages. Numbers are written
/// with 17 significant digits so values read back exactly.
pub fn write_psd_to<W: Write>(w: &mut W, psd: &Psd, path: &Path) -> Result<()> {
    psd.validate()?;
    let mut head = format!("# schema_version={PSD_SCHEMA_VERSION}\n# kind={}\n", psd.kind);
    let m = &psd.meta;
    if let Some(e) = m.estimator {
        head.push_str(&format!("# estimator={e}\n"));
    }
    if let Some(w) = m.window {
        head.push_str(&format!("# window={w}\n"));
    }
    if let Some(d) = m.delay_s {
        head.push_str(&format!("# delay_s={d:e}\n"));
    }
    if let Some(t) = m.trim_fraction {
        head.push_str(&format!("# trim={t}\n"));
    }
    for note in &m.notes {
        head.push_str(&format!("# note={}\n", note.replace(['\n', '\r'], " ")));
    }
    w.write_all(head.as_bytes()).map_err(io_err(path))?;

    let mut csv = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| format_err(path, e.to_string());
    csv.write_record(COLUMNS).map_err(csv_err)?;
    for b in &psd.bins {
        csv.write_record([
            format!("{:.16e}", b.freq_hz),
            format!("{:.16e}", b.value),
            b.band_index.to_string(),
            b.n_avg.to_string(),
            b.flag.code().to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(io_err(path))
}

pub fn read_psd(path: &Path) -> Result<Psd> {
    let file = File::open(path).map_err(io_err(path))?;
    read_psd_from(BufReader::new(file), path)
}

/// Parses a spectrum; `path` only labels error messages.
pub fn read_psd_from<R: Read>(r: R, path: &Path) -> Result<Psd> {
    let mut r = BufReader::new(r);
    let mut kind = None;
    let mut version = None;
    let mut meta = PsdMeta::default();
    let mut line = String::new();
    let mut body = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(io_err(path))? == 0 {
            break;
        }
        let Some(comment) = line.strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let comment = comment.trim();
        let Some((key, value)) = comment.split_once('=') else {
            continue;
        };
        let bad = |what: &str| format_err(path, format!("bad {what} '{value}'"));
        match key.trim() {
            "schema_version" => version = Some(value.parse::<u32>().map_err(|_| bad("schema_version"))?),
            "kind" => kind = Some(value.parse::<PsdKind>().map_err(|_| bad("kind"))?),
            "estimator" => meta.estimator = Some(value.parse().map_err(|_| bad("estimator"))?),
            "window" => meta.window = Some(value.parse().map_err(|_| bad("window"))?),
            "delay_s" => meta.delay_s = Some(value.parse().map_err(|_| bad("delay_s"))?),
            "trim" => meta.trim_fraction = Some(value.parse().map_err(|_| bad("trim"))?),
            "note" => meta.notes.push(value.to_string()),
            _ => {}
        }
    }
    match version {
        Some(PSD_SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(format_err(
                path,
                format!("unsupported PSD schema_version {v} (expected {PSD_SCHEMA_VERSION})"),
            ))
        }
        None => return Err(format_err(path, "missing '# schema_version=' header line")),
    }
    let kind = kind.ok_or_else(|| format_err(path, "missing '# kind=' header line"))?;
    r.read_to_string(&mut body).map_err(io_err(path))?;

    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = csv.headers().map_err(|e| format_err(path, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(format_err(
            path,
            format!("expected columns {}, found {:?}", COLUMNS.join(","), headers),
        ));
    }
    let mut bins = Vec::new();
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| format_err(path, format!("row {}: missing {}", row + 1, COLUMNS[i])))
        };
        let parse_err = |i: usize| format_err(path, format!("row {}: bad {}", row + 1, COLUMNS[i]));
        let flag_code: u8 = field(4)?.parse().map_err(|_| parse_err(4))?;
        bins.push(PsdBin {
            freq_hz: field(0)?.parse().map_err(|_| parse_err(0))?,
            value: field(1)?.parse().map_err(|_| parse_err(1))?,
            band_index: field(2)?.parse().map_err(|_| parse_err(2))?,
            n_avg: field(3)?.parse().map_err(|_| parse_err(3))?,
            flag: BinFlag::from_code(flag_code).ok_or_else(|| parse_err(4))?,
        });
    }
    let psd = Psd::new(kind, bins).map_err(|e| match e {
        CoshError::Format { .. } => e,
        other => format_err(path, other.to_string()),
    })?;
    Ok(psd.with_meta(meta))
}
