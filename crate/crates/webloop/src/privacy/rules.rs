//! Deterministic pattern-rule detector.
//!
//! Emails, phone-like digit runs (10+), and street addresses flag PERSONAL;
//! 13-16 digit runs passing the Luhn checksum flag FINANCIAL; keyword
//! lexicons cover HEALTH, SECURITY, and SENSITIVE. Bare full names never
//! trigger anything.

use super::{DetectorKind, PrivacyCategory, PrivacyVerdict};
use regex::Regex;
use std::collections::BTreeSet;
use std::sync::LazyLock;

static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").expect("static regex")
});

/// Digit runs possibly broken by separators; classified by digit count.
static NUMBER_SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d[\d\-\s().]{7,}\d|\d{10,}").expect("static regex"));

static STREET_ADDRESS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b\d+\s+(?:[A-Za-z0-9]+\s+){0,3}(?:street|st\.|avenue|ave\.|road|rd\.|boulevard|blvd\.?|lane|ln\.|drive|dr\.|court|ct\.|way)\b",
    )
    .expect("static regex")
});

const HEALTH_TERMS: &[&str] = &[
    "medical record",
    "diagnosis",
    "diagnoses",
    "prescription",
    "health insurance",
    "treatment plan",
    "patient chart",
    "blood pressure",
];

const SECURITY_TERMS: &[&str] = &[
    "password",
    "passcode",
    "security question",
    "pin code",
    "api key",
    "secret key",
    "access token",
    "credential",
    "social security",
    "passport number",
    "driver's license",
    "biometric",
    "fingerprint",
];

const SENSITIVE_TERMS: &[&str] = &[
    "sexual orientation",
    "political affiliation",
    "religious belief",
    "criminal record",
    "ethnicity",
    "racial background",
];

fn luhn_valid(digits: &[u8]) -> bool {
    let mut sum = 0u32;
    for (i, d) in digits.iter().rev().enumerate() {
        let mut v = u32::from(*d);
        if i % 2 == 1 {
            v *= 2;
            if v > 9 {
                v -= 9;
            }
        }
        sum += v;
    }
    sum.is_multiple_of(10)
}

/// Scans `text` with the pattern rules and keyword lexicons.
pub fn detect_rules(text: &str) -> PrivacyVerdict {
    let mut categories = BTreeSet::new();
    if EMAIL.is_match(text) {
        categories.insert(PrivacyCategory::Personal);
    }
    if STREET_ADDRESS.is_match(text) {
        categories.insert(PrivacyCategory::Personal);
    }
    for span in NUMBER_SPAN.find_iter(text) {
        let digits: Vec<u8> = span
            .as_str()
            .bytes()
            .filter(|b| b.is_ascii_digit())
            .map(|b| b - b'0')
            .collect();
        if (13..=16).contains(&digits.len()) && luhn_valid(&digits) {
            categories.insert(PrivacyCategory::Financial);
        } else if digits.len() >= 10 {
            categories.insert(PrivacyCategory::Personal);
        }
    }
    let lower = text.to_lowercase();
    for (terms, category) in [
        (HEALTH_TERMS, PrivacyCategory::Health),
        (SECURITY_TERMS, PrivacyCategory::Security),
        (SENSITIVE_TERMS, PrivacyCategory::Sensitive),
    ] {
        if terms.iter().any(|t| lower.contains(t)) {
            categories.insert(category);
        }
    }
    PrivacyVerdict {
        found: !categories.is_empty(),
        categories,
        detector: DetectorKind::Rules,
    }
}
