//! Seeded synthetic corpora: benign request templates plus curated
//! SQLi/XSS/command-injection/traversal payloads injected into parameter
//! values. Fixtures live in `data/payloads/` and ship with the crate, so
//! tests stay hermetic.
//!
//! Generation is deterministic: record `i` draws from its own ChaCha stream
//! `i`, so the corpus does not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reqsieve_core::request::{ClassLabel, Corpus, RawRequest};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadFamily {
    Sqli,
    Xss,
    Cmdi,
    Traversal,
}

impl PayloadFamily {
    pub const ALL: [PayloadFamily; 4] = [
        PayloadFamily::Sqli,
        PayloadFamily::Xss,
        PayloadFamily::Cmdi,
        PayloadFamily::Traversal,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PayloadFamily::Sqli => "sqli",
            PayloadFamily::Xss => "xss",
            PayloadFamily::Cmdi => "cmdi",
            PayloadFamily::Traversal => "traversal",
        }
    }

    /// The curated payload fixture for this family.
    pub fn payloads(self) -> Vec<&'static str> {
        let raw = match self {
            PayloadFamily::Sqli => include_str!("../data/payloads/sqli.txt"),
            PayloadFamily::Xss => include_str!("../data/payloads/xss.txt"),
            PayloadFamily::Cmdi => include_str!("../data/payloads/cmdi.txt"),
            PayloadFamily::Traversal => include_str!("../data/payloads/traversal.txt"),
        };
        raw.lines().filter(|l| !l.is_empty()).collect()
    }

    /// Parses "sqli,xss,cmdi,traversal" subsets.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<PayloadFamily>, String> {
        s.split(',')
            .map(|part| match part.trim() {
                "sqli" => Ok(PayloadFamily::Sqli),
                "xss" => Ok(PayloadFamily::Xss),
                "cmdi" => Ok(PayloadFamily::Cmdi),
                "traversal" => Ok(PayloadFamily::Traversal),
                other => Err(format!("unknown payload family {other:?}")),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_normal: usize,
    pub n_attack: usize,
    pub path_templates: Vec<String>,
    pub payload_families: Vec<PayloadFamily>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_normal: usize, n_attack: usize, seed: u64) -> Self {
        SynthSpec {
            n_normal,
            n_attack,
            path_templates: default_templates(),
            payload_families: PayloadFamily::ALL.to_vec(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.path_templates.is_empty() {
            return Err(Error::Config("synth spec needs at least one template".into()));
        }
        if self.n_attack > 0 && self.payload_families.is_empty() {
            return Err(Error::Config(
                "attack generation needs at least one payload family".into(),
            ));
        }
        Ok(())
    }
}

/// Benign target templates; placeholders draw from fixed pools.
pub fn default_templates() -> Vec<String> {
    [
        "/index.html",
        "/products?id={id}&cat={cat}",
        "/search?q={word}",
        "/api/v1/items/{num}",
        "/account/login",
        "/static/js/app.js",
        "/blog/{word}/{num}",
        "/cart?item={id}&qty={num}",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

const WORDS: [&str; 20] = [
    "alpha", "bravo", "charlie", "delta", "foxtrot", "golf", "hotel", "india", "juliet", "kilo",
    "lima", "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango", "victor",
];

const USER_AGENTS: [&str; 4] = [
    "mozilla/5.0",
    "curl/8.1",
    "okhttp/4.9",
    "python-requests/2.31",
];

const ACCEPTS: [&str; 2] = ["*/*", "text/html"];

fn fill_template(rng: &mut ChaCha8Rng, template: &str) -> String {
    let mut target = template.to_string();
    while let Some(start) = target.find('{') {
        let end = match target[start..].find('}') {
            Some(offset) => start + offset,
            None => break,
        };
        let replacement = match &target[start + 1..end] {
            "id" => format!("i{}", rng.random_range(0..20)),
            "cat" => format!("c{}", rng.random_range(0..10)),
            "word" => WORDS[rng.random_range(0..WORDS.len())].to_string(),
            "num" => rng.random_range(0..500).to_string(),
            other => format!("x{other}x"),
        };
        target.replace_range(start..=end, &replacement);
    }
    target
}

fn base_request(rng: &mut ChaCha8Rng, templates: &[String]) -> RawRequest {
    let template = &templates[rng.random_range(0..templates.len())];
    let target = fill_template(rng, template);
    let mut req = RawRequest::new("GET", target)
        .with_header("Host", "app.example")
        .with_header("User-Agent", USER_AGENTS[rng.random_range(0..USER_AGENTS.len())])
        .with_header("Accept", ACCEPTS[rng.random_range(0..ACCEPTS.len())]);
    if rng.random::<f64>() < 0.3 {
        req.method = "POST".to_string();
        let word = WORDS[rng.random_range(0..WORDS.len())];
        let session = rng.random_range(0..10_000);
        req.body = format!("user={word}&session={session}").into_bytes();
    }
    req
}

/// Percent-encode everything outside unreserved characters, so the payload
/// survives as one parameter value.
fn encode_payload(payload: &str) -> String {
    let mut out = String::with_capacity(payload.len() * 3);
    for b in payload.bytes() {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'.' | b'-' | b'_' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn inject_payload(rng: &mut ChaCha8Rng, req: &mut RawRequest, families: &[PayloadFamily]) {
    let family = families[rng.random_range(0..families.len())];
    let payloads = family.payloads();
    let payload = payloads[rng.random_range(0..payloads.len())];
    let mut encoded = encode_payload(payload);
    // attackers mask payloads with a second encoding layer now and then
    if rng.random::<f64>() < 0.25 {
        encoded = encode_payload(&encoded);
    }
    // the %20 separator keeps the benign target token intact, so attacks
    // differ from their template only by the payload tokens
    req.target.push_str("%20");
    req.target.push_str(&encoded);
}

/// Deterministic corpus: `n_normal` benign requests followed by `n_attack`
/// attacks, labels included.
pub fn generate(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut requests = Vec::with_capacity(spec.n_normal + spec.n_attack);
    for i in 0..spec.n_normal {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        requests.push(base_request(&mut rng, &spec.path_templates).with_label(ClassLabel::Normal));
    }
    for k in 0..spec.n_attack {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream((spec.n_normal + k) as u64);
        let mut req = base_request(&mut rng, &spec.path_templates);
        inject_payload(&mut rng, &mut req, &spec.payload_families);
        requests.push(req.with_label(ClassLabel::Attack));
    }
    Ok(Corpus::new(
        format!("synth(seed={})", spec.seed),
        requests,
    ))
}
