//! Model-based privacy detection over a local backend.

use super::{DetectorKind, PrivacyCategory, PrivacyVerdict};
use crate::gateway::{extract_tags, Backend};
use std::collections::BTreeSet;

pub const FIND_TAG: &str = "[PRIVATE FIND]";
pub const NOT_FIND_TAG: &str = "[PRIVATE NOT FIND]";

/// Detection prompt: sensitive-personal-information guidelines plus the tag
/// protocol. The verdict tag must appear at the end of the reply; category
/// tags name what was found.
pub const PRIVACY_DETECT_PROMPT: &str = "You are an intelligent agent designed to analyze text inputs (observations or prompts) and determine if they contain sensitive personal information (SPI). SPI refers to any data that could be used to identify, contact, or harm an individual, or any data that is confidential or private by nature. Your goal is to ensure compliance with privacy standards and prevent any unintentional sharing of such information.\n\
\n\
Guidelines for identifying sensitive personal information (notice: a full name alone is NOT SPI, not PII, and not sensitive information):\n\
\n\
- Personal Identifiable Information (PII): address (home, mailing, or work); phone number; email address; date of birth; Social Security number or other national ID numbers; passport, driver's license, or other government-issued IDs.\n\
- Financial Data: credit card numbers; bank account details; financial transaction details; tax details.\n\
- Health Information (PHI): medical records; health insurance details; diagnoses, treatments, or prescriptions.\n\
- Authentication and Security Data: passwords or PINs; security questions and answers; biometric information (e.g., fingerprints, facial recognition data).\n\
- Sensitive Contextual Information: sexual orientation; political affiliations; religious beliefs; criminal records; ethnicity or racial background.\n\
- Other Sensitive Information: any data that could be harmful, embarrassing, or lead to identity theft or financial loss if disclosed.\n\
\n\
If any private message is found in the text below, reply [PRIVATE FIND]. If not, reply [PRIVATE NOT FIND]. These two kinds of reply can only appear at the end. Also tell me what kind of sensitive data: if it is Personal Identifiable Information, return [PERSONAL]; if it is Financial Data, return [FINANCIAL]; if it is Health Information, return [HEALTH]; if it is Authentication and Security Data, return [SECURITY]; if it is Sensitive Contextual Information, return [SENSITIVE]; if it is Other Sensitive Information, return [OTHER].";

/// The verdict tag is only honored "at the end": within this many trailing
/// characters of the response.
const VERDICT_TAIL_CHARS: usize = 200;

fn tail(response: &str, chars: usize) -> &str {
    let start = response
        .char_indices()
        .rev()
        .nth(chars.saturating_sub(1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    &response[start..]
}

/// Scans `text` with the detector backend. Fails closed: transport errors
/// and replies without a verdict tag in the tail region count as found.
pub fn detect_model(backend: &Backend, text: &str) -> PrivacyVerdict {
    let response = match backend.complete(PRIVACY_DETECT_PROMPT, text) {
        Ok(response) => response,
        Err(err) => {
            log::warn!("privacy detector backend failed; failing closed: {err}");
            return PrivacyVerdict {
                found: true,
                categories: BTreeSet::new(),
                detector: DetectorKind::Model,
            };
        }
    };
    let tail = tail(&response, VERDICT_TAIL_CHARS);
    let found = match (tail.rfind(FIND_TAG), tail.rfind(NOT_FIND_TAG)) {
        (Some(f), Some(n)) => f > n,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        // Missing verdict tag: the detector disobeyed the protocol.
        (None, None) => true,
    };
    let categories = if found {
        extract_tags(
            &response,
            &["[PERSONAL]", "[FINANCIAL]", "[HEALTH]", "[SECURITY]", "[SENSITIVE]", "[OTHER]"],
        )
        .into_iter()
        .filter_map(|tag| match tag.as_str() {
            "[PERSONAL]" => Some(PrivacyCategory::Personal),
            "[FINANCIAL]" => Some(PrivacyCategory::Financial),
            "[HEALTH]" => Some(PrivacyCategory::Health),
            "[SECURITY]" => Some(PrivacyCategory::Security),
            "[SENSITIVE]" => Some(PrivacyCategory::Sensitive),
            "[OTHER]" => Some(PrivacyCategory::Other),
            _ => None,
        })
        .collect()
    } else {
        BTreeSet::new()
    };
    PrivacyVerdict {
        found,
        categories,
        detector: DetectorKind::Model,
    }
}
