#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use intent_ids::manifest::Label;
use intent_ids::nn::{Activation, LossKind, Matrix, Network};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/manifests")
}

fn strip_comments(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        match rest[start..].find("-->") {
            Some(end) => rest = &rest[start + end + 3..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn unescape(v: &str) -> String {
    v.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Quoted attribute values in a tag body, as `(attribute name, value)`.
fn attributes(tag: &str) -> Vec<(String, String)> {
    let bytes = tag.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(eq) = tag[i..].find('=') {
        let eq = i + eq;
        let mut k_end = eq;
        while k_end > 0 && bytes[k_end - 1].is_ascii_whitespace() {
            k_end -= 1;
        }
        let mut k_start = k_end;
        while k_start > 0 && !bytes[k_start - 1].is_ascii_whitespace() && bytes[k_start - 1] != b'<' {
            k_start -= 1;
        }
        let mut q = eq + 1;
        while q < bytes.len() && bytes[q].is_ascii_whitespace() {
            q += 1;
        }
        if q >= bytes.len() {
            break;
        }
        let quote = bytes[q] as char;
        let close = tag[q + 1..].find(quote).map(|c| q + 1 + c).expect("closing quote");
        out.push((tag[k_start..k_end].to_string(), unescape(&tag[q + 1..close])));
        i = close + 1;
    }
    out
}

/// Every `<...>` tag body with its element name.
fn tags(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let close = rest[open..].find('>').map(|c| open + c).expect("tag end");
        let body = &rest[open + 1..close];
        let name: String = body
            .chars()
            .take_while(|c| !c.is_whitespace() && *c != '/' && *c != '>')
            .collect();
        out.push((name, body.to_string()));
        rest = &rest[close + 1..];
    }
    out
}

pub fn oracle_normalize(raw: &str) -> String {
    let parts: Vec<&str> = raw.trim().split('.').collect();
    let mut start = 0;
    for (i, p) in parts.iter().enumerate() {
        if ["action", "category", "extra"].contains(p) && i + 1 < parts.len() {
            start = i + 1;
        }
    }
    parts[start..]
        .iter()
        .filter(|p| !p.is_empty())
        .cloned()
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn is_extra_shape(v: &str) -> bool {
    match v.find(".intent.extra.") {
        Some(p) => p > 0 && p + 14 < v.len(),
        None => false,
    }
}

/// Intent multiset found by plain text scanning: action/category `name`
/// values between `<intent-filter>` and `</intent-filter>`, plus every
/// attribute value of the `*.intent.extra.*` shape.
pub fn substring_oracle(xml: &str) -> BTreeMap<(String, String), u32> {
    let text = strip_comments(xml);
    let mut out = BTreeMap::new();
    let mut inside = false;
    for (name, body) in tags(&text) {
        if name.starts_with('?') {
            continue;
        }
        for (_, value) in attributes(&body) {
            if is_extra_shape(&value) {
                *out.entry(("extra".to_string(), oracle_normalize(&value))).or_insert(0) += 1;
            }
        }
        match name.as_str() {
            "intent-filter" => inside = !body.trim_end().ends_with('/'),
            "/intent-filter" => inside = false,
            "action" | "category" if inside => {
                let value = attributes(&body)
                    .into_iter()
                    .find(|(k, _)| k == "name" || k.ends_with(":name"))
                    .map(|(_, v)| v);
                if let Some(v) = value {
                    *out.entry((name.clone(), oracle_normalize(&v))).or_insert(0) += 1;
                }
            }
            _ => {}
        }
    }
    out
}

/// Pair-counting AUC: ties between a positive and a negative score count half.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Label::Malicious)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Label::Benign)
        .map(|(s, _)| *s)
        .collect();
    let mut credit = 0u64;
    for p in &pos {
        for n in &neg {
            credit += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    credit as f64 / (2 * pos.len() * neg.len()) as f64
}

/// Largest relative error between analytic and central-difference gradients
/// over every weight and bias.
pub fn max_gradient_error(net: &Network, x: &Matrix, t: &Matrix, loss: LossKind, h: f64) -> f64 {
    let pass = net.forward(x).unwrap();
    let grads = net.backward(&pass, t, loss).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic - numeric).abs() / denom);
    };
    for (l, layer) in net.layers.iter().enumerate() {
        for r in 0..layer.weights.rows() {
            for c in 0..layer.weights.cols() {
                let mut plus = net.clone();
                plus.layers[l].weights.row_mut(r)[c] += h;
                let mut minus = net.clone();
                minus.layers[l].weights.row_mut(r)[c] -= h;
                let numeric = (plus.loss(x, t, loss).unwrap() - minus.loss(x, t, loss).unwrap()) / (2.0 * h);
                check(grads[l].weights[(r, c)], numeric);
            }
        }
        for b in 0..layer.bias.len() {
            let mut plus = net.clone();
            plus.layers[l].bias[b] += h;
            let mut minus = net.clone();
            minus.layers[l].bias[b] -= h;
            let numeric = (plus.loss(x, t, loss).unwrap() - minus.loss(x, t, loss).unwrap()) / (2.0 * h);
            check(grads[l].bias[b], numeric);
        }
    }
    worst
}

pub const ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
pub const LOSSES: [LossKind; 2] = [LossKind::Mse, LossKind::Bce];

/// Smallest |pre-activation| over ReLU units; central differences are unreliable near zero.
pub fn relu_kink_distance(net: &Network, x: &Matrix) -> f64 {
    let pass = net.forward(x).unwrap();
    let mut nearest = f64::INFINITY;
    for (layer, input) in net.layers.iter().zip(&pass.outputs) {
        if layer.activation != Activation::Relu {
            continue;
        }
        for row in input.row_iter() {
            for (w, b) in layer.weights.row_iter().zip(&layer.bias) {
                let z = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
                nearest = nearest.min(z.abs());
            }
        }
    }
    nearest
}
