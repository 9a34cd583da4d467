//! Line-delimited JSON request logs.
//!
//! One request per line, columnar within the line:
//!
//! ```text
//! {"schema_version":1,"request_id":0,
//!  "constraints":{"page_length":50,"top_ad_slot":5,"min_ad_gap":4},
//!  "rec":{"id":[..],"utility_rec":[..],"pctr":[..],"pcvr":[..],"item_price":[..]},
//!  "ads":{"id":[..],"utility_rec":[..],"utility_ad":[..],"pctr":[..],"pcvr":[..],
//!         "item_price":[..],"price_per_click":[..]}}
//! ```
//!
//! Upstream ranks are implied by array order. Unknown fields are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Candidate, CandidateId, CandidateKind, Request, RequestConstraints};
use crate::simulator::run::{RequestIter, RequestSource};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecColumns {
    id: Vec<CandidateId>,
    utility_rec: Vec<f64>,
    pctr: Vec<f64>,
    pcvr: Vec<f64>,
    item_price: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdColumns {
    id: Vec<CandidateId>,
    utility_rec: Vec<f64>,
    utility_ad: Vec<f64>,
    pctr: Vec<f64>,
    pcvr: Vec<f64>,
    item_price: Vec<f64>,
    price_per_click: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestRecord {
    schema_version: u32,
    request_id: u64,
    constraints: RequestConstraints,
    rec: RecColumns,
    ads: AdColumns,
}

impl RequestRecord {
    fn from_request(r: &Request) -> Self {
        let col = |list: &[Candidate], f: fn(&Candidate) -> f64| list.iter().map(f).collect::<Vec<_>>();
        RequestRecord {
            schema_version: SCHEMA_VERSION,
            request_id: r.request_id,
            constraints: r.constraints,
            rec: RecColumns {
                id: r.rec_list.iter().map(|c| c.id).collect(),
                utility_rec: col(&r.rec_list, |c| c.utility_rec),
                pctr: col(&r.rec_list, |c| c.pctr),
                pcvr: col(&r.rec_list, |c| c.pcvr),
                item_price: col(&r.rec_list, |c| c.item_price),
            },
            ads: AdColumns {
                id: r.ad_list.iter().map(|c| c.id).collect(),
                utility_rec: col(&r.ad_list, |c| c.utility_rec),
                utility_ad: col(&r.ad_list, |c| c.utility_ad),
                pctr: col(&r.ad_list, |c| c.pctr),
                pcvr: col(&r.ad_list, |c| c.pcvr),
                item_price: col(&r.ad_list, |c| c.item_price),
                price_per_click: col(&r.ad_list, |c| c.price_per_click),
            },
        }
    }

    fn into_request(self) -> std::result::Result<Request, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let rec = self.rec;
        let n = rec.id.len();
        if [rec.utility_rec.len(), rec.pctr.len(), rec.pcvr.len(), rec.item_price.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err("rec columns have different lengths".into());
        }
        let ads = self.ads;
        let k = ads.id.len();
        if [
            ads.utility_rec.len(),
            ads.utility_ad.len(),
            ads.pctr.len(),
            ads.pcvr.len(),
            ads.item_price.len(),
            ads.price_per_click.len(),
        ]
        .iter()
        .any(|&l| l != k)
        {
            return Err("ads columns have different lengths".into());
        }
        let rec_list = (0..n)
            .map(|i| Candidate {
                id: rec.id[i],
                kind: CandidateKind::Organic,
                upstream_rank: i as u32 + 1,
                utility_rec: rec.utility_rec[i],
                utility_ad: 0.0,
                pctr: rec.pctr[i],
                pcvr: rec.pcvr[i],
                item_price: rec.item_price[i],
                price_per_click: 0.0,
            })
            .collect();
        let ad_list = (0..k)
            .map(|i| Candidate {
                id: ads.id[i],
                kind: CandidateKind::Ad,
                upstream_rank: i as u32 + 1,
                utility_rec: ads.utility_rec[i],
                utility_ad: ads.utility_ad[i],
                pctr: ads.pctr[i],
                pcvr: ads.pcvr[i],
                item_price: ads.item_price[i],
                price_per_click: ads.price_per_click[i],
            })
            .collect();
        Request::new(self.request_id, rec_list, ad_list, self.constraints).map_err(|e| e.to_string())
    }
}

pub fn encode_request(r: &Request) -> Result<String> {
    Ok(serde_json::to_string(&RequestRecord::from_request(r))?)
}

/// Parses one log line; `line` is only used in the error.
pub fn decode_request(text: &str, line: usize) -> Result<Request> {
    let record: RequestRecord = serde_json::from_str(text).map_err(|e| Error::Schema {
        line,
        reason: e.to_string(),
    })?;
    record.into_request().map_err(|reason| Error::Schema { line, reason })
}

/// Writes `requests` to `path`, one line each. Returns the number written.
pub fn write_log(path: &Path, requests: impl IntoIterator<Item = Request>) -> Result<usize> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut n = 0;
    for r in requests {
        w.write_all(encode_request(&r)?.as_bytes())?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// A request log on disk, re-read on every [`RequestSource::open`].
#[derive(Debug, Clone)]
pub struct LogFile {
    path: PathBuf,
}

impl LogFile {
    pub fn new(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if !path.is_file() {
            return Err(Error::MissingInput(format!("request log {}", path.display())));
        }
        Ok(LogFile { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl RequestSource for LogFile {
    fn open(&self) -> Result<RequestIter<'_>> {
        let reader = BufReader::new(File::open(&self.path)?);
        Ok(Box::new(
            reader
                .lines()
                .enumerate()
                .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
                .map(|(i, l)| decode_request(&l?, i + 1)),
        ))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<Request>> {
    LogFile::new(path)?.open()?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::generator::{generate_stream, GeneratorConfig};

    #[test]
    fn round_trip() {
        let cfg = GeneratorConfig {
            num_requests: 20,
            ..GeneratorConfig::default()
        };
        let reqs = generate_stream(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        assert_eq!(write_log(&path, reqs.clone()).unwrap(), 20);
        assert_eq!(read_log(&path).unwrap(), reqs);
    }

    #[test]
    fn schema_errors_name_the_line() {
        let cfg = GeneratorConfig {
            num_requests: 1,
            ..GeneratorConfig::default()
        };
        let r = &generate_stream(&cfg).unwrap()[0];
        let good = encode_request(r).unwrap();
        let bad_version = good.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(decode_request(&bad_version, 3), Err(Error::Schema { line: 3, .. })));
        let extra = good.replacen('{', "{\"extra\":0,", 1);
        assert!(matches!(decode_request(&extra, 4), Err(Error::Schema { line: 4, .. })));
        assert!(matches!(decode_request("not json", 1), Err(Error::Schema { line: 1, .. })));
    }
}
