//! CSV/JSON rendering. Files are rendered in memory and written only after
//! the whole command has succeeded.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use spade_core::table::CurveTable;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn header_lines(command: &str, metadata: &[(String, String)]) -> String {
    let mut s = format!("# spade {} {}\n", env!("CARGO_PKG_VERSION"), command);
    for (k, v) in metadata {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}

pub fn csv<R>(
    command: &str,
    metadata: &[(String, String)],
    header: &[&str],
    rows: R,
) -> io::Result<Vec<u8>>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut buf = header_lines(command, metadata).into_bytes();
    {
        let mut w = ::csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn curve_csv(
    command: &str,
    metadata: &[(String, String)],
    table: &CurveTable,
) -> io::Result<Vec<u8>> {
    let mut meta = metadata.to_vec();
    meta.push(("x".into(), table.x_label.clone()));
    meta.push(("y".into(), table.y_label.clone()));
    csv(
        command,
        &meta,
        &["x", "series", "y"],
        table
            .rows
            .iter()
            .map(|r| vec![r.x.to_string(), r.series.clone(), r.y.to_string()]),
    )
}

pub fn json(
    command: &str,
    metadata: &[(String, String)],
    body: serde_json::Value,
) -> io::Result<Vec<u8>> {
    let meta: serde_json::Map<String, serde_json::Value> = metadata
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": meta,
        "result": body,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            fs::write(&p, &a.bytes)?;
            Ok(p)
        })
        .collect()
}
