//! Netlist text → [`Netlist`].
//!
//! Line handling: `*` starts a comment line, `;` starts an inline comment,
//! a leading `+` continues the previous card. Everything is case-insensitive.
//! The first line is taken as the title when it does not parse as a card and
//! its leading token has no digit (so `R1 1 0` still reports a missing value).

use std::collections::BTreeMap;

use super::error::ParseError;
use super::types::*;
use super::value::parse_value;

#[derive(Debug, Clone)]
struct Token {
    text: String,
    col: usize,
}

#[derive(Debug, Clone)]
struct Card {
    line: usize,
    text: String,
}

/// Parses a netlist. See the module docs for the accepted line syntax.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(1, 1, "empty netlist"));
    }
    let cards = logical_cards(text)?;
    let mut netlist = Netlist::default();
    let mut stack: Vec<SubcktDef> = Vec::new();
    let mut control_block: Option<(usize, Vec<String>)> = None;

    for (index, card) in cards.iter().enumerate() {
        if let Some((_, lines)) = control_block.as_mut() {
            lines.push(card.text.clone());
            if first_word_lower(&card.text) == ".endc" {
                let (_, lines) = control_block.take().unwrap();
                netlist.unknown.push(OpaqueDirective {
                    text: lines.join("\n"),
                });
            }
            continue;
        }
        let head = first_word_lower(&card.text);
        if index == 0 && !head.starts_with('.') && looks_like_title(&card.text) {
            netlist.title = card.text.trim().to_string();
            continue;
        }
        if head.starts_with('.') {
            match head.as_str() {
                ".end" => {
                    netlist.end_present = true;
                    break;
                }
                ".control" => {
                    control_block = Some((card.line, vec![card.text.clone()]));
                }
                ".title" => {
                    let rest = card.text.trim()[6..].trim();
                    netlist.title = rest.to_string();
                }
                ".model" => {
                    let model = parse_model(card)?;
                    if netlist.models.contains_key(&model.name) {
                        return Err(ParseError::new(
                            card.line,
                            1,
                            format!("duplicate .model `{}`", model.name),
                        ));
                    }
                    netlist.models.insert(model.name.clone(), model);
                }
                ".subckt" => {
                    let toks = tokenize(&card.text);
                    if toks.len() < 2 {
                        return Err(err_at(card, toks.first(), ".subckt needs a name"));
                    }
                    let mut ports = Vec::new();
                    for t in &toks[2..] {
                        if t.text.contains('=') || t.text.eq_ignore_ascii_case("params:") {
                            return Err(err_at(
                                card,
                                Some(t),
                                "subcircuit parameters are not supported",
                            ));
                        }
                        ports.push(NodeId::new(&t.text));
                    }
                    stack.push(SubcktDef {
                        name: toks[1].text.to_uppercase(),
                        ports,
                        elements: Vec::new(),
                    });
                }
                ".ends" => {
                    let Some(def) = stack.pop() else {
                        return Err(ParseError::new(card.line, 1, ".ends without .subckt"));
                    };
                    if netlist.subckts.contains_key(&def.name) {
                        return Err(ParseError::new(
                            card.line,
                            1,
                            format!("duplicate .subckt `{}`", def.name),
                        ));
                    }
                    netlist.subckts.insert(def.name.clone(), def);
                }
                ".op" | ".dc" | ".tran" | ".ac" | ".temp" => {
                    let directive = parse_analysis(card, &head)?;
                    if matches!(directive, AnalysisDirective::Temp { .. })
                        && netlist.temperature().is_some()
                    {
                        return Err(ParseError::new(card.line, 1, "more than one .temp directive"));
                    }
                    netlist.directives.push(directive);
                }
                _ => {
                    tracing::debug!(line = card.line, directive = %head, "keeping unknown directive");
                    netlist.unknown.push(OpaqueDirective {
                        text: card.text.trim().to_string(),
                    });
                }
            }
            continue;
        }
        let element = parse_element(card)?;
        match stack.last_mut() {
            Some(def) => def.elements.push(element),
            None => netlist.elements.push(element),
        }
    }

    if let Some(def) = stack.last() {
        let line = cards.last().map(|c| c.line).unwrap_or(1);
        return Err(ParseError::new(
            line,
            1,
            format!(".subckt `{}` without .ends", def.name),
        ));
    }
    if let Some((line, _)) = control_block {
        return Err(ParseError::new(line, 1, ".control without .endc"));
    }
    Ok(netlist)
}

/// True when a single line is a card this parser accepts (element or dot-card).
pub fn is_card_line(line: &str) -> bool {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return false;
    }
    let card = Card {
        line: 1,
        text: trimmed.to_string(),
    };
    let head = first_word_lower(trimmed);
    match head.as_str() {
        ".end" | ".ends" | ".op" | ".control" | ".endc" => true,
        ".model" => parse_model(&card).is_ok(),
        ".subckt" => tokenize(trimmed).len() >= 2,
        ".dc" | ".tran" | ".ac" | ".temp" => parse_analysis(&card, &head).is_ok(),
        h if h.starts_with('.') => false,
        _ => parse_element(&card).is_ok(),
    }
}

fn first_word_lower(text: &str) -> String {
    text.split_whitespace()
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn looks_like_title(text: &str) -> bool {
    let card = Card {
        line: 1,
        text: text.to_string(),
    };
    if parse_element(&card).is_ok() {
        return false;
    }
    let first = text.split_whitespace().next().unwrap_or("");
    match first.chars().next() {
        Some(c) if ElementKind::from_letter(c).is_some() => {
            !first.chars().any(|c| c.is_ascii_digit())
        }
        _ => true,
    }
}

fn logical_cards(text: &str) -> Result<Vec<Card>, ParseError> {
    let mut cards: Vec<Card> = Vec::new();
    let mut in_control = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let without_comment = match raw.find(';') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = without_comment.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let lower = first_word_lower(line);
        if in_control {
            // .control bodies are engine scripts, not cards.
            if lower == ".endc" {
                in_control = false;
            }
            cards.push(Card {
                line: line_no,
                text: line.to_string(),
            });
            continue;
        }
        if lower == ".control" {
            in_control = true;
        }
        if let Some(rest) = line.strip_prefix('+') {
            match cards.last_mut() {
                Some(prev) => {
                    prev.text.push(' ');
                    prev.text.push_str(rest.trim());
                }
                None => {
                    return Err(ParseError::new(
                        line_no,
                        1,
                        "continuation line with nothing to continue",
                    ))
                }
            }
            continue;
        }
        cards.push(Card {
            line: line_no,
            text: line.to_string(),
        });
    }
    Ok(cards)
}

/// Splits on whitespace, parentheses and commas; re-joins `key = value`.
fn tokenize(text: &str) -> Vec<Token> {
    let mut raw: Vec<Token> = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (col, ch) in text.chars().enumerate() {
        if ch.is_whitespace() || ch == '(' || ch == ')' || ch == ',' || ch == '=' {
            if !current.is_empty() {
                raw.push(Token {
                    text: std::mem::take(&mut current),
                    col: start + 1,
                });
            }
            if ch == '=' {
                raw.push(Token {
                    text: "=".into(),
                    col: col + 1,
                });
            }
        } else {
            if current.is_empty() {
                start = col;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        raw.push(Token {
            text: current,
            col: start + 1,
        });
    }
    let mut out: Vec<Token> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i].text == "=" {
            let value = raw.get(i + 1).map(|t| t.text.clone()).unwrap_or_default();
            match out.last_mut() {
                Some(prev) if !prev.text.contains('=') => {
                    prev.text.push('=');
                    prev.text.push_str(&value);
                }
                _ => out.push(Token {
                    text: format!("={value}"),
                    col: raw[i].col,
                }),
            }
            i += 2;
            continue;
        }
        out.push(raw[i].clone());
        i += 1;
    }
    out
}

fn err_at(card: &Card, tok: Option<&Token>, reason: impl Into<String>) -> ParseError {
    ParseError::new(card.line, tok.map(|t| t.col).unwrap_or(1), reason)
}

fn value_at(card: &Card, tok: &Token) -> Result<f64, ParseError> {
    parse_value(&tok.text).map_err(|reason| err_at(card, Some(tok), reason))
}

fn key_value(tok: &Token) -> Option<(String, &str)> {
    let (k, v) = tok.text.split_once('=')?;
    Some((k.to_ascii_uppercase(), v))
}

fn end_col(card: &Card) -> usize {
    card.text.chars().count() + 1
}

fn parse_element(card: &Card) -> Result<Element, ParseError> {
    let toks = tokenize(&card.text);
    let Some(name_tok) = toks.first() else {
        return Err(ParseError::new(card.line, 1, "empty card"));
    };
    let letter = name_tok.text.chars().next().unwrap_or(' ');
    let Some(kind) = ElementKind::from_letter(letter) else {
        return Err(err_at(
            card,
            Some(name_tok),
            format!(
                "unsupported element `{}` (supported: R C L M Q V I X)",
                name_tok.text
            ),
        ));
    };
    if name_tok.text.contains('=') {
        return Err(err_at(card, Some(name_tok), "malformed element name"));
    }
    let name = name_tok.text.to_uppercase();
    let arity = match kind {
        ElementKind::Mosfet => 4,
        ElementKind::Bjt => 3,
        ElementKind::Subckt => 0,
        _ => 2,
    };
    if kind != ElementKind::Subckt {
        for i in 1..=arity {
            match toks.get(i) {
                Some(t) if !t.text.contains('=') => {}
                other => {
                    return Err(ParseError::new(
                        card.line,
                        other.map(|t| t.col).unwrap_or_else(|| end_col(card)),
                        format!("{name}: expected {arity} nodes, found {}", i - 1),
                    ))
                }
            }
        }
    }
    let nodes: Vec<NodeId> = toks
        .iter()
        .skip(1)
        .take(arity)
        .map(|t| NodeId::new(&t.text))
        .collect();
    let rest = &toks[(1 + arity).min(toks.len())..];

    let payload = match kind {
        ElementKind::Resistor | ElementKind::Capacitor | ElementKind::Inductor => {
            let Some(tok) = rest.first() else {
                return Err(ParseError::new(
                    card.line,
                    end_col(card),
                    format!("{name}: missing value"),
                ));
            };
            if let Some(extra) = rest.get(1) {
                return Err(err_at(
                    card,
                    Some(extra),
                    format!("{name}: unexpected token `{}`", extra.text),
                ));
            }
            let value = value_at(card, tok)?;
            if value <= 0.0 || !value.is_finite() {
                return Err(err_at(
                    card,
                    Some(tok),
                    format!("{name}: value must be positive, got {value}"),
                ));
            }
            match kind {
                ElementKind::Resistor => ElementPayload::Resistor { value },
                ElementKind::Capacitor => ElementPayload::Capacitor { value },
                _ => ElementPayload::Inductor { value },
            }
        }
        ElementKind::Mosfet => ElementPayload::Mosfet(parse_mosfet(card, &name, rest)?),
        ElementKind::Bjt => ElementPayload::Bjt(parse_bjt(card, &name, rest)?),
        ElementKind::VoltageSource | ElementKind::CurrentSource => {
            let spec = parse_source(card, &name, rest)?;
            if kind == ElementKind::VoltageSource {
                ElementPayload::VoltageSource(spec)
            } else {
                ElementPayload::CurrentSource(spec)
            }
        }
        ElementKind::Subckt => {
            if let Some(t) = toks.iter().skip(1).find(|t| t.text.contains('=')) {
                return Err(err_at(
                    card,
                    Some(t),
                    "subcircuit instance parameters are not supported",
                ));
            }
            if toks.len() < 3 {
                return Err(ParseError::new(
                    card.line,
                    end_col(card),
                    format!("{name}: expected nodes followed by a subcircuit name"),
                ));
            }
            let subckt = toks[toks.len() - 1].text.to_uppercase();
            let nodes = toks[1..toks.len() - 1]
                .iter()
                .map(|t| NodeId::new(&t.text))
                .collect();
            return Ok(Element {
                name,
                nodes,
                payload: ElementPayload::Subckt { subckt },
            });
        }
    };
    Ok(Element {
        name,
        nodes,
        payload,
    })
}

fn parse_mosfet(card: &Card, name: &str, rest: &[Token]) -> Result<MosfetParams, ParseError> {
    let Some(model_tok) = rest.first().filter(|t| !t.text.contains('=')) else {
        return Err(ParseError::new(
            card.line,
            rest.first().map(|t| t.col).unwrap_or_else(|| end_col(card)),
            format!("{name}: missing model name"),
        ));
    };
    let mut w = None;
    let mut l = None;
    let mut m = 1u32;
    let mut extra = BTreeMap::new();
    for tok in &rest[1..] {
        let Some((key, raw)) = key_value(tok) else {
            return Err(err_at(
                card,
                Some(tok),
                format!("{name}: expected KEY=VALUE, found `{}`", tok.text),
            ));
        };
        if key.is_empty() {
            return Err(err_at(card, Some(tok), format!("{name}: missing parameter name")));
        }
        let value = parse_value(raw).map_err(|r| err_at(card, Some(tok), r))?;
        match key.as_str() {
            "W" => w = Some(value),
            "L" => l = Some(value),
            "M" => {
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(err_at(
                        card,
                        Some(tok),
                        format!("{name}: multiplicity must be a positive integer"),
                    ));
                }
                m = value as u32;
            }
            _ => {
                extra.insert(key, value);
            }
        }
    }
    let (Some(w), Some(l)) = (w, l) else {
        return Err(ParseError::new(
            card.line,
            end_col(card),
            format!("{name}: W and L must both be given"),
        ));
    };
    if w <= 0.0 || l <= 0.0 {
        return Err(ParseError::new(
            card.line,
            model_tok.col,
            format!("{name}: W and L must be positive"),
        ));
    }
    Ok(MosfetParams {
        model: model_tok.text.to_uppercase(),
        w,
        l,
        m,
        extra,
    })
}

fn parse_bjt(card: &Card, name: &str, rest: &[Token]) -> Result<BjtParams, ParseError> {
    let Some(model_tok) = rest.first().filter(|t| !t.text.contains('=')) else {
        return Err(ParseError::new(
            card.line,
            rest.first().map(|t| t.col).unwrap_or_else(|| end_col(card)),
            format!("{name}: missing model name"),
        ));
    };
    let mut area = None;
    for tok in &rest[1..] {
        let raw = match key_value(tok) {
            Some((key, raw)) if key == "AREA" => raw,
            None if area.is_none() => tok.text.as_str(),
            _ => {
                return Err(err_at(
                    card,
                    Some(tok),
                    format!("{name}: unexpected token `{}`", tok.text),
                ))
            }
        };
        let value = parse_value(raw).map_err(|r| err_at(card, Some(tok), r))?;
        if value <= 0.0 {
            return Err(err_at(card, Some(tok), format!("{name}: area must be positive")));
        }
        area = Some(value);
    }
    Ok(BjtParams {
        model: model_tok.text.to_uppercase(),
        area,
    })
}

fn parse_source(card: &Card, name: &str, rest: &[Token]) -> Result<SourceSpec, ParseError> {
    let mut dc: Option<f64> = None;
    let mut ac: Option<(f64, f64)> = None;
    let mut transient: Option<SourceWaveform> = None;
    let mut i = 0;
    let numeric = |t: &Token| parse_value(&t.text).ok();
    while i < rest.len() {
        let tok = &rest[i];
        let upper = tok.text.to_ascii_uppercase();
        if let Some((key, raw)) = key_value(tok) {
            if key == "DC" && dc.is_none() {
                dc = Some(parse_value(raw).map_err(|r| err_at(card, Some(tok), r))?);
                i += 1;
                continue;
            }
            return Err(err_at(
                card,
                Some(tok),
                format!("{name}: unexpected parameter `{}`", tok.text),
            ));
        }
        match upper.as_str() {
            "DC" => {
                let v = rest
                    .get(i + 1)
                    .ok_or_else(|| ParseError::new(card.line, end_col(card), format!("{name}: DC needs a value")))?;
                dc = Some(value_at(card, v)?);
                i += 2;
            }
            "AC" => {
                let mag_tok = rest
                    .get(i + 1)
                    .ok_or_else(|| ParseError::new(card.line, end_col(card), format!("{name}: AC needs a magnitude")))?;
                let mag = value_at(card, mag_tok)?;
                let phase = rest.get(i + 2).and_then(numeric);
                ac = Some((mag, phase.unwrap_or(0.0)));
                i += if phase.is_some() { 3 } else { 2 };
            }
            "PULSE" | "SIN" | "PWL" => {
                if transient.is_some() {
                    return Err(err_at(card, Some(tok), format!("{name}: more than one waveform")));
                }
                let mut args = Vec::new();
                let mut j = i + 1;
                while let Some(v) = rest.get(j).and_then(numeric) {
                    args.push(v);
                    j += 1;
                }
                transient = Some(build_waveform(card, tok, name, &upper, &args)?);
                i = j;
            }
            _ => {
                if dc.is_none() && transient.is_none() && i == 0 {
                    dc = Some(value_at(card, tok)?);
                    i += 1;
                } else {
                    return Err(err_at(
                        card,
                        Some(tok),
                        format!("{name}: unexpected token `{}`", tok.text),
                    ));
                }
            }
        }
    }
    let waveform = match (transient, dc) {
        (Some(w), _) => w,
        (None, Some(v)) => SourceWaveform::Dc { v },
        (None, None) if ac.is_some() => SourceWaveform::Dc { v: 0.0 },
        (None, None) => {
            return Err(ParseError::new(
                card.line,
                end_col(card),
                format!("{name}: missing source value"),
            ))
        }
    };
    Ok(SourceSpec { waveform, ac })
}

fn build_waveform(
    card: &Card,
    tok: &Token,
    name: &str,
    kind: &str,
    args: &[f64],
) -> Result<SourceWaveform, ParseError> {
    let bad = |msg: String| err_at(card, Some(tok), format!("{name}: {msg}"));
    match kind {
        "PULSE" => {
            if args.len() != 7 {
                return Err(bad(format!(
                    "PULSE needs 7 values (v1 v2 td tr tf pw per), found {}",
                    args.len()
                )));
            }
            Ok(SourceWaveform::Pulse {
                v1: args[0],
                v2: args[1],
                td: args[2],
                tr: args[3],
                tf: args[4],
                pw: args[5],
                per: args[6],
            })
        }
        "SIN" => {
            if !(3..=5).contains(&args.len()) {
                return Err(bad(format!(
                    "SIN needs 3 to 5 values (vo va freq [td [theta]]), found {}",
                    args.len()
                )));
            }
            Ok(SourceWaveform::Sin {
                vo: args[0],
                va: args[1],
                freq: args[2],
                td: args.get(3).copied().unwrap_or(0.0),
                theta: args.get(4).copied().unwrap_or(0.0),
            })
        }
        _ => {
            if args.is_empty() || !args.len().is_multiple_of(2) {
                return Err(bad(format!(
                    "PWL needs time/value pairs, found {} values",
                    args.len()
                )));
            }
            Ok(SourceWaveform::Pwl {
                points: args.chunks(2).map(|c| (c[0], c[1])).collect(),
            })
        }
    }
}

fn parse_model(card: &Card) -> Result<ModelCard, ParseError> {
    let toks = tokenize(&card.text);
    if toks.len() < 3 {
        return Err(ParseError::new(
            card.line,
            end_col(card),
            ".model needs a name and a type",
        ));
    }
    let kind = match toks[2].text.to_ascii_uppercase().as_str() {
        "NMOS" => ModelKind::Nmos,
        "PMOS" => ModelKind::Pmos,
        "NPN" => ModelKind::Npn,
        "PNP" => ModelKind::Pnp,
        other => {
            return Err(err_at(
                card,
                Some(&toks[2]),
                format!("unsupported model type `{other}` (supported: NMOS PMOS NPN PNP)"),
            ))
        }
    };
    if toks[1].text.contains('=') {
        return Err(err_at(card, Some(&toks[1]), "malformed model name"));
    }
    let mut params = BTreeMap::new();
    for tok in &toks[3..] {
        let Some((key, raw)) = key_value(tok).filter(|(k, _)| !k.is_empty()) else {
            return Err(err_at(
                card,
                Some(tok),
                format!("expected KEY=VALUE in .model, found `{}`", tok.text),
            ));
        };
        let value = parse_value(raw).map_err(|r| err_at(card, Some(tok), r))?;
        params.insert(key, value);
    }
    Ok(ModelCard {
        name: toks[1].text.to_uppercase(),
        kind,
        params,
    })
}

fn parse_analysis(card: &Card, head: &str) -> Result<AnalysisDirective, ParseError> {
    let toks = tokenize(&card.text);
    let args = &toks[1..];
    let expect = |range: std::ops::RangeInclusive<usize>, usage: &str| {
        if range.contains(&args.len()) {
            Ok(())
        } else {
            Err(ParseError::new(
                card.line,
                args.get(*range.end()).map(|t| t.col).unwrap_or_else(|| end_col(card)),
                format!("usage: {usage}"),
            ))
        }
    };
    match head {
        ".op" => {
            expect(0..=0, ".op")?;
            Ok(AnalysisDirective::Op)
        }
        ".dc" => {
            expect(4..=4, ".dc <source> <start> <stop> <step>")?;
            Ok(AnalysisDirective::Dc {
                source: args[0].text.to_uppercase(),
                start: value_at(card, &args[1])?,
                stop: value_at(card, &args[2])?,
                step: value_at(card, &args[3])?,
            })
        }
        ".tran" => {
            expect(2..=4, ".tran <tstep> <tstop> [tstart [tmax]]")?;
            Ok(AnalysisDirective::Tran {
                tstep: value_at(card, &args[0])?,
                tstop: value_at(card, &args[1])?,
                tstart: args.get(2).map(|t| value_at(card, t)).transpose()?,
                tmax: args.get(3).map(|t| value_at(card, t)).transpose()?,
            })
        }
        ".ac" => {
            expect(4..=4, ".ac dec|oct|lin <points> <fstart> <fstop>")?;
            let variation = match args[0].text.to_ascii_lowercase().as_str() {
                "dec" => AcVariation::Dec,
                "oct" => AcVariation::Oct,
                "lin" => AcVariation::Lin,
                _ => return Err(err_at(card, Some(&args[0]), "expected dec, oct or lin")),
            };
            let points = value_at(card, &args[1])?;
            if points < 0.0 || points.fract() != 0.0 || points > u32::MAX as f64 {
                return Err(err_at(card, Some(&args[1]), "point count must be a whole number"));
            }
            Ok(AnalysisDirective::Ac {
                variation,
                npoints: points as u32,
                fstart: value_at(card, &args[2])?,
                fstop: value_at(card, &args[3])?,
            })
        }
        _ => {
            expect(1..=1, ".temp <celsius>")?;
            Ok(AnalysisDirective::Temp {
                celsius: value_at(card, &args[0])?,
            })
        }
    }
}
