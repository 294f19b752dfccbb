//! DNS query log parsing and per-host observation windows.
//!
//! The log format is a flat CSV, one query per line:
//! `ts,host,server,qname,qtype,rcode,ttl,ips` with `ips` a `;`-joined list
//! of IPv4 addresses. A leading header line matching the column names is
//! skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Expected header line of a query log file.
pub const LOG_HEADER: &str = "ts,host,server,qname,qtype,rcode,ttl,ips";

/// DNS query type. Anything beyond the modeled set maps to `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryType {
    A,
    Aaaa,
    Mx,
    Txt,
    Ptr,
    Other,
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryType::A => "A",
            QueryType::Aaaa => "AAAA",
            QueryType::Mx => "MX",
            QueryType::Txt => "TXT",
            QueryType::Ptr => "PTR",
            QueryType::Other => "OTHER",
        };
        f.write_str(s)
    }
}

impl FromStr for QueryType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "A" => QueryType::A,
            "AAAA" => QueryType::Aaaa,
            "MX" => QueryType::Mx,
            "TXT" => QueryType::Txt,
            "PTR" => QueryType::Ptr,
            _ => QueryType::Other,
        })
    }
}

/// DNS response code. Unknown strings map to `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResponseCode {
    NoError,
    NxDomain,
    ServFail,
    Other,
}

impl fmt::Display for ResponseCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResponseCode::NoError => "NOERROR",
            ResponseCode::NxDomain => "NXDOMAIN",
            ResponseCode::ServFail => "SERVFAIL",
            ResponseCode::Other => "OTHER",
        };
        f.write_str(s)
    }
}

impl FromStr for ResponseCode {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "NOERROR" => ResponseCode::NoError,
            "NXDOMAIN" => ResponseCode::NxDomain,
            "SERVFAIL" => ResponseCode::ServFail,
            _ => ResponseCode::Other,
        })
    }
}

/// One parsed DNS query event.
///
/// Invariants: `timestamp >= 0`, `qname` non-empty and lowercase,
/// `resolved_ips` empty whenever `rcode != NoError`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnsQueryRecord {
    pub timestamp: i64,
    pub host: String,
    pub server: String,
    pub qname: String,
    pub qtype: QueryType,
    pub rcode: ResponseCode,
    pub ttl: u32,
    pub resolved_ips: Vec<Ipv4Addr>,
}

/// All queries of one host falling into one time window.
///
/// Records are sorted by timestamp (stable on ties) and satisfy
/// `window_start <= timestamp < window_start + window_length`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HostWindow {
    pub host: String,
    pub window_start: i64,
    pub window_length: i64,
    pub records: Vec<DnsQueryRecord>,
}

fn parse_line(line: &str, line_no: usize) -> Result<DnsQueryRecord> {
    let err = |msg: String| Error::LogFormat { line: line_no, msg };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(err(format!("expected 8 fields, got {}", fields.len())));
    }
    let timestamp: i64 = fields[0]
        .parse()
        .map_err(|_| err(format!("ts is not an integer: {:?}", fields[0])))?;
    if timestamp < 0 {
        return Err(err(format!("ts is negative: {timestamp}")));
    }
    let host = fields[1].to_string();
    if host.is_empty() {
        return Err(err("host is empty".into()));
    }
    let server = fields[2].to_string();
    let qname = fields[3].to_lowercase();
    if qname.is_empty() {
        return Err(err("qname is empty".into()));
    }
    let qtype = fields[4].parse().unwrap();
    let rcode: ResponseCode = fields[5].parse().unwrap();
    let ttl: u32 = if fields[6].is_empty() {
        0
    } else {
        fields[6]
            .parse()
            .map_err(|_| err(format!("ttl is not a non-negative integer: {:?}", fields[6])))?
    };
    let resolved_ips = if fields[7].is_empty() {
        Vec::new()
    } else {
        fields[7]
            .split(';')
            .map(|s| {
                s.parse::<Ipv4Addr>()
                    .map_err(|_| err(format!("bad IPv4 address: {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if rcode != ResponseCode::NoError && !resolved_ips.is_empty() {
        return Err(err(format!("resolved ips present on {rcode} response")));
    }
    Ok(DnsQueryRecord { timestamp, host, server, qname, qtype, rcode, ttl, resolved_ips })
}

/// Parses a query log. Empty input yields an empty list; malformed lines are
/// errors carrying their 1-based line number.
pub fn parse_query_log<R: BufRead>(reader: R) -> Result<Vec<DnsQueryRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 && line == LOG_HEADER {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        records.push(parse_line(&line, idx + 1)?);
    }
    Ok(records)
}

/// Renders one record as a log line (without trailing newline).
pub fn record_to_line(record: &DnsQueryRecord) -> String {
    let ips = record
        .resolved_ips
        .iter()
        .map(|ip| ip.to_string())
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{}",
        record.timestamp,
        record.host,
        record.server,
        record.qname,
        record.qtype,
        record.rcode,
        record.ttl,
        ips
    )
}

/// Writes records in the log format, header line included.
pub fn write_query_log<W: Write>(records: &[DnsQueryRecord], mut writer: W) -> Result<()> {
    writeln!(writer, "{LOG_HEADER}")?;
    for record in records {
        writeln!(writer, "{}", record_to_line(record))?;
    }
    Ok(())
}

/// Partitions records into per-host windows of `window_length` seconds
/// aligned to multiples of `window_length`. Windows come out sorted by
/// `(host, window_start)`; records within a window keep input order on
/// timestamp ties.
pub fn aggregate_windows(
    records: Vec<DnsQueryRecord>,
    window_length: i64,
) -> Result<Vec<HostWindow>> {
    if window_length <= 0 {
        return Err(Error::InvalidInput(format!(
            "window_length must be positive, got {window_length}"
        )));
    }
    let mut buckets: BTreeMap<(String, i64), Vec<DnsQueryRecord>> = BTreeMap::new();
    for record in records {
        let window_start = record.timestamp / window_length * window_length;
        buckets
            .entry((record.host.clone(), window_start))
            .or_default()
            .push(record);
    }
    Ok(buckets
        .into_iter()
        .map(|((host, window_start), mut records)| {
            records.sort_by_key(|r| r.timestamp);
            HostWindow { host, window_start, window_length, records }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ts: i64, host: &str) -> DnsQueryRecord {
        DnsQueryRecord {
            timestamp: ts,
            host: host.into(),
            server: "9.9.9.9".into(),
            qname: "example.com".into(),
            qtype: QueryType::A,
            rcode: ResponseCode::NoError,
            ttl: 300,
            resolved_ips: vec![Ipv4Addr::new(1, 2, 3, 4)],
        }
    }

    #[test]
    fn parses_basic_line() {
        let log = "100,h1,9.9.9.9,Example.COM,A,NOERROR,300,1.2.3.4\n";
        let records = parse_query_log(log.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.qname, "example.com");
        assert_eq!(r.qtype, QueryType::A);
        assert_eq!(r.resolved_ips, vec![Ipv4Addr::new(1, 2, 3, 4)]);
    }

    #[test]
    fn unknown_qtype_maps_to_other() {
        let log = "100,h1,9.9.9.9,x.com,SRV,NOERROR,300,\n";
        let records = parse_query_log(log.as_bytes()).unwrap();
        assert_eq!(records[0].qtype, QueryType::Other);
        assert!(records[0].resolved_ips.is_empty());
    }

    #[test]
    fn short_line_errors_with_line_number() {
        let log = "100,h1,9.9.9.9,x.com,A,NOERROR,300,\n100,h1,bad\n";
        let err = parse_query_log(log.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::LogFormat { line: 2, .. }), "{err}");
    }

    #[test]
    fn non_integer_ts_errors() {
        let err = parse_query_log("x,h1,s,q.com,A,NOERROR,0,\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ts"), "{err}");
    }

    #[test]
    fn ips_on_failed_response_rejected() {
        let err =
            parse_query_log("1,h1,s,q.com,A,NXDOMAIN,0,1.2.3.4\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("NXDOMAIN"), "{err}");
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_query_log("".as_bytes()).unwrap().is_empty());
        assert!(parse_query_log(format!("{LOG_HEADER}\n").as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn header_only_skipped_on_first_line() {
        let log = format!("{LOG_HEADER}\n100,h1,9.9.9.9,x.com,A,NOERROR,300,\n");
        assert_eq!(parse_query_log(log.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn windows_split_on_boundaries() {
        let records = vec![record(10, "h1"), record(70, "h1")];
        let windows = aggregate_windows(records, 60).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].window_start, 0);
        assert_eq!(windows[1].window_start, 60);
    }

    #[test]
    fn same_window_groups_records() {
        let records = vec![record(10, "h1"), record(59, "h1")];
        let windows = aggregate_windows(records, 60).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].records.len(), 2);
    }

    #[test]
    fn empty_records_empty_windows() {
        assert!(aggregate_windows(Vec::new(), 60).unwrap().is_empty());
    }

    #[test]
    fn window_partition_preserves_every_record() {
        let records = vec![
            record(10, "h2"),
            record(4000, "h1"),
            record(10, "h1"),
            record(9999, "h2"),
        ];
        let windows = aggregate_windows(records.clone(), 3600).unwrap();
        let total: usize = windows.iter().map(|w| w.records.len()).sum();
        assert_eq!(total, records.len());
        for w in &windows {
            for r in &w.records {
                assert_eq!(r.host, w.host);
                assert!(w.window_start <= r.timestamp);
                assert!(r.timestamp < w.window_start + w.window_length);
            }
        }
        let starts: Vec<(String, i64)> =
            windows.iter().map(|w| (w.host.clone(), w.window_start)).collect();
        let mut sorted = starts.clone();
        sorted.sort();
        assert_eq!(starts, sorted);
    }

    #[test]
    fn timestamp_ties_keep_input_order() {
        let mut a = record(5, "h1");
        a.qname = "first.com".into();
        let mut b = record(5, "h1");
        b.qname = "second.com".into();
        let windows = aggregate_windows(vec![a, b], 60).unwrap();
        assert_eq!(windows[0].records[0].qname, "first.com");
        assert_eq!(windows[0].records[1].qname, "second.com");
    }

    #[test]
    fn round_trip_parsed_records() {
        let log = "100,h1,9.9.9.9,Example.COM,A,NOERROR,300,1.2.3.4;5.6.7.8\n\
                   101,h2,8.8.8.8,x.com,SRV,NXDOMAIN,0,\n";
        let records = parse_query_log(log.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_query_log(&records, &mut buf).unwrap();
        let reparsed = parse_query_log(buf.as_slice()).unwrap();
        assert_eq!(records, reparsed);
    }
}
