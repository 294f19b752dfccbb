//! The 25-feature numeric schema computed per host window.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::data::{Dataset, Label, RowKey};
use crate::error::{Error, Result};
use crate::ingest::{HostWindow, QueryType, ResponseCode};
use crate::scalar::Scalar;

/// Number of features in the canonical schema.
pub const FEATURE_COUNT: usize = 25;

/// Canonical feature schema, in order. Documented in the repository README.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "window_start_hour",
    "num_requests",
    "num_distinct_requests",
    "max_requests_single_domain",
    "avg_requests_per_minute",
    "max_requests_per_minute",
    "num_type_a_requests",
    "num_distinct_tlds",
    "num_distinct_slds",
    "num_distinct_servers",
    "num_type_aaaa_requests",
    "num_type_mx_requests",
    "num_type_txt_requests",
    "num_type_ptr_requests",
    "avg_qname_length",
    "max_qname_length",
    "avg_qname_entropy",
    "num_failed_responses",
    "ratio_failed_responses",
    "avg_response_ttl",
    "min_response_ttl",
    "num_distinct_resolved_ips",
    "max_ips_single_domain",
    "avg_domains_per_ip",
    "num_distinct_resolved_subnets",
];

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// The 25 feature values of one host window, plus an optional label.
#[derive(Clone, Debug, PartialEq)]
pub struct HostFeatureVector<T> {
    pub host: String,
    pub window_start: i64,
    pub values: Vec<T>,
    pub label: Option<Label>,
}

/// Shannon entropy in bits of the character distribution of `s`.
fn char_entropy<T: Scalar>(s: &str) -> T {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in s.chars() {
        *counts.entry(c).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return T::zero();
    }
    let total = T::from_count(total);
    let mut h = T::zero();
    for &count in counts.values() {
        let p = T::from_count(count) / total;
        h = h - p * p.log2();
    }
    h
}

/// Last dot-separated token of a qname.
fn tld(qname: &str) -> &str {
    qname.rsplit('.').next().unwrap_or(qname)
}

/// Last two dot-separated tokens joined; the whole name when it has no dot.
fn sld(qname: &str) -> &str {
    match qname.rmatch_indices('.').nth(1) {
        Some((i, _)) => &qname[i + 1..],
        None => qname,
    }
}

/// Computes the canonical 25-feature vector for a non-empty window.
pub fn extract_features<T: Scalar>(window: &HostWindow) -> Result<HostFeatureVector<T>> {
    if window.records.is_empty() {
        return Err(Error::InvalidInput(format!(
            "window ({}, {}) is empty",
            window.host, window.window_start
        )));
    }
    let records = &window.records;
    let count = |f: &dyn Fn(&crate::ingest::DnsQueryRecord) -> bool| {
        records.iter().filter(|r| f(r)).count()
    };

    let num_requests = records.len();
    let mut qname_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *qname_counts.entry(r.qname.as_str()).or_insert(0) += 1;
    }
    let num_distinct = qname_counts.len();
    let max_single_domain = qname_counts.values().copied().max().unwrap_or(0);

    let mut minute_counts: HashMap<i64, usize> = HashMap::new();
    for r in records {
        *minute_counts.entry((r.timestamp - window.window_start) / 60).or_insert(0) += 1;
    }
    let max_per_minute = minute_counts.values().copied().max().unwrap_or(0);

    let tlds: BTreeSet<&str> = qname_counts.keys().map(|q| tld(q)).collect();
    let slds: BTreeSet<&str> = qname_counts.keys().map(|q| sld(q)).collect();
    let servers: BTreeSet<&str> = records.iter().map(|r| r.server.as_str()).collect();

    let n = T::from_count(num_requests);
    let avg_per_minute =
        n * T::from_f64_lossy(60.0) / T::from_f64_lossy(window.window_length as f64);

    let avg_len = records.iter().map(|r| T::from_count(r.qname.chars().count())).sum::<T>() / n;
    let max_len = records.iter().map(|r| r.qname.chars().count()).max().unwrap_or(0);
    let avg_entropy = records.iter().map(|r| char_entropy::<T>(&r.qname)).sum::<T>() / n;

    let failed = count(&|r| r.rcode != ResponseCode::NoError);
    let avg_ttl = records.iter().map(|r| T::from_count(r.ttl as usize)).sum::<T>() / n;
    let min_ttl = records.iter().map(|r| r.ttl).min().unwrap_or(0);

    let all_ips: BTreeSet<_> = records.iter().flat_map(|r| r.resolved_ips.iter()).collect();
    let mut ips_per_domain: BTreeMap<&str, BTreeSet<_>> = BTreeMap::new();
    for r in records {
        ips_per_domain.entry(r.qname.as_str()).or_default().extend(r.resolved_ips.iter());
    }
    let max_ips_single = ips_per_domain.values().map(|s| s.len()).max().unwrap_or(0);
    let subnets: BTreeSet<[u8; 3]> = all_ips
        .iter()
        .map(|ip| {
            let o = ip.octets();
            [o[0], o[1], o[2]]
        })
        .collect();
    let domains_per_ip = if all_ips.is_empty() {
        T::zero()
    } else {
        T::from_count(num_distinct) / T::from_count(all_ips.len())
    };

    let type_count = |t: QueryType| T::from_count(count(&|r| r.qtype == t));

    let values = vec![
        T::from_count((window.window_start / 3600 % 24) as usize),
        n,
        T::from_count(num_distinct),
        T::from_count(max_single_domain),
        avg_per_minute,
        T::from_count(max_per_minute),
        type_count(QueryType::A),
        T::from_count(tlds.len()),
        T::from_count(slds.len()),
        T::from_count(servers.len()),
        type_count(QueryType::Aaaa),
        type_count(QueryType::Mx),
        type_count(QueryType::Txt),
        type_count(QueryType::Ptr),
        avg_len,
        T::from_count(max_len),
        avg_entropy,
        T::from_count(failed),
        T::from_count(failed) / n,
        avg_ttl,
        T::from_count(min_ttl as usize),
        T::from_count(all_ips.len()),
        T::from_count(max_ips_single),
        domains_per_ip,
        T::from_count(subnets.len()),
    ];
    debug_assert_eq!(values.len(), FEATURE_COUNT);

    Ok(HostFeatureVector {
        host: window.host.clone(),
        window_start: window.window_start,
        values,
        label: None,
    })
}

/// Assembles feature vectors into a dataset sorted by `(host, window_start)`.
///
/// Labels are all-or-nothing: every vector labeled, or none.
pub fn vectors_to_dataset<T: Scalar>(mut vectors: Vec<HostFeatureVector<T>>) -> Result<Dataset<T>> {
    vectors.sort_by(|a, b| (&a.host, a.window_start).cmp(&(&b.host, b.window_start)));
    let labeled = vectors.iter().filter(|v| v.label.is_some()).count();
    if labeled != 0 && labeled != vectors.len() {
        return Err(Error::InvalidInput(
            "mixed labeled and unlabeled feature vectors".into(),
        ));
    }
    let labels = if labeled == 0 {
        None
    } else {
        Some(vectors.iter().map(|v| v.label.unwrap()).collect())
    };
    let rows: Vec<Vec<T>> = vectors.iter().map(|v| v.values.clone()).collect();
    let row_keys =
        vectors.iter().map(|v| RowKey::new(v.host.clone(), v.window_start)).collect();
    Dataset::new(feature_names(), rows, labels, row_keys)
}

/// Featurizes windows and attaches per-host labels from a sidecar map.
/// Every windowed host must appear in the map when one is given.
pub fn featurize_windows<T: Scalar>(
    windows: &[HostWindow],
    host_labels: Option<&HashMap<String, Label>>,
) -> Result<Dataset<T>> {
    let mut vectors = Vec::with_capacity(windows.len());
    for window in windows {
        let mut v = extract_features(window)?;
        if let Some(map) = host_labels {
            v.label = Some(*map.get(&window.host).ok_or_else(|| {
                Error::InvalidInput(format!("no label for host {:?}", window.host))
            })?);
        }
        vectors.push(v);
    }
    vectors_to_dataset(vectors)
}
