//! Line-oriented textual `.nts` format.
//!
//! ```text
//! # comment
//! universe a b c x y
//! sorts chan: a b c; var: x y        (optional; single default sort otherwise)
//! state P supp{a}
//! perm (a b): P -> Pab               (orbit rows; omitted rows are identity)
//! pred phi supp{}
//! sat P phi
//! act out(chan,chan) bn{}
//! act bout(chan;var) bn{2}           (bn lists 1-based argument positions)
//! trans P --bout(a;x)--> Q
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nominal::{Name, NameSet, Sort, Universe};
use crate::nts::{ActDecl, ActLabel, Nts, NtsBuilder};

struct Line<'a> {
    no: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    fn err<T>(&self, col: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.no, col, msg: msg.into() })
    }
}

/// Parse a `.nts` document.
pub fn parse(input: &str) -> Result<Nts> {
    let mut pending_sorts: Option<Vec<(String, Vec<String>)>> = None;
    let mut universe_names: Option<Vec<String>> = None;

    // Universe and sorts lines are combined before anything else is parsed.
    let mut body: Vec<Line> = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        let line = Line { no: i + 1, text };
        if let Some(rest) = text.strip_prefix("universe") {
            if universe_names.is_some() {
                return line.err(1, "duplicate universe line");
            }
            let names: Vec<String> = rest.split_whitespace().map(String::from).collect();
            if names.is_empty() {
                return line.err(1, "universe line lists no names");
            }
            universe_names = Some(names);
        } else if let Some(rest) = text.strip_prefix("sorts") {
            let mut decls = Vec::new();
            for part in rest.split(';') {
                let (sort, members) = part
                    .split_once(':')
                    .ok_or(Error::Parse { line: line.no, col: 1, msg: "expected `sort: names`".into() })?;
                decls.push((
                    sort.trim().to_string(),
                    members.split_whitespace().map(String::from).collect(),
                ));
            }
            pending_sorts = Some(decls);
        } else {
            body.push(line);
        }
    }

    let names = universe_names
        .ok_or(Error::Parse { line: 1, col: 1, msg: "missing universe line".into() })?;
    let universe = match pending_sorts {
        None => Universe::single_sorted(names)?,
        Some(decls) => {
            let sort_labels: Vec<String> = decls.iter().map(|(s, _)| s.clone()).collect();
            let mut sorts = Vec::with_capacity(names.len());
            for n in &names {
                let tag = decls
                    .iter()
                    .position(|(_, members)| members.contains(n))
                    .ok_or(Error::Parse {
                        line: 1,
                        col: 1,
                        msg: format!("name `{n}` missing from the sorts declaration"),
                    })?;
                sorts.push(Sort(tag as u8));
            }
            Universe::new(names, sorts, sort_labels)?
        }
    };
    let mut b = NtsBuilder::new(universe);

    for line in &body {
        let text = line.text;
        if let Some(rest) = text.strip_prefix("state ") {
            let (name, supp) = parse_decl_with_supp(line, rest, &b)?;
            b.add_state(name, supp)?;
        } else if let Some(rest) = text.strip_prefix("pred ") {
            let (name, supp) = parse_decl_with_supp(line, rest, &b)?;
            b.add_pred(name, supp)?;
        } else if let Some(rest) = text.strip_prefix("act ") {
            let decl = parse_act_decl(line, rest, b.universe())?;
            b.add_act(decl)?;
        } else if let Some(rest) = text.strip_prefix("sat ") {
            let mut it = rest.split_whitespace();
            let sname = it.next().ok_or_else(|| parse_err(line, "expected state"))?;
            let pname = it.next().ok_or_else(|| parse_err(line, "expected predicate"))?;
            let s = b
                .lookup_state(sname)
                .ok_or_else(|| parse_err(line, format!("unknown state `{sname}`")))?;
            let p = b
                .lookup_pred(pname)
                .ok_or_else(|| parse_err(line, format!("unknown predicate `{pname}`")))?;
            b.add_sat(s, p);
        } else if let Some(rest) = text.strip_prefix("perm ") {
            parse_perm(line, rest, &mut b)?;
        } else if let Some(rest) = text.strip_prefix("trans ") {
            parse_trans(line, rest, &mut b)?;
        } else {
            return line.err(1, format!("unrecognised line `{text}`"));
        }
    }

    b.build()
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_err(line: &Line, msg: impl Into<String>) -> Error {
    Error::Parse { line: line.no, col: 1, msg: msg.into() }
}

fn parse_name(line: &Line, b: &NtsBuilder, token: &str) -> Result<Name> {
    b.universe()
        .lookup(token)
        .ok_or_else(|| parse_err(line, format!("`{token}` is not a universe name")))
}

fn parse_decl_with_supp(line: &Line, rest: &str, b: &NtsBuilder) -> Result<(String, NameSet)> {
    let rest = rest.trim();
    let (name, supp_part) = match rest.split_once("supp{") {
        Some((n, s)) => (n.trim(), s),
        None => return line.err(1, "expected `NAME supp{...}`"),
    };
    let inner = supp_part
        .strip_suffix('}')
        .ok_or_else(|| parse_err(line, "unterminated supp{...}"))?;
    let mut supp = NameSet::empty();
    for token in inner.split(|c| c == ',' || c == ' ').filter(|t| !t.is_empty()) {
        supp.insert(parse_name(line, b, token)?);
    }
    if name.is_empty() {
        return line.err(1, "missing name before supp{...}");
    }
    Ok((name.to_string(), supp))
}

fn parse_act_decl(line: &Line, rest: &str, u: &Universe) -> Result<ActDecl> {
    // NAME(sort,sort;...) bn{positions}; `;` and `,` both separate arguments.
    let rest = rest.trim();
    let (sig, bn_part) = rest
        .split_once("bn{")
        .ok_or_else(|| parse_err(line, "expected `act NAME(...) bn{...}`"))?;
    let bn_inner = bn_part
        .strip_suffix('}')
        .ok_or_else(|| parse_err(line, "unterminated bn{...}"))?;
    let sig = sig.trim();
    let (name, args) = match sig.split_once('(') {
        Some((n, a)) => {
            let a = a
                .strip_suffix(')')
                .ok_or_else(|| parse_err(line, "unterminated argument list"))?;
            (n.trim(), a)
        }
        None => (sig, ""),
    };
    let mut arg_sorts = Vec::new();
    for token in args.split(|c| c == ',' || c == ';').map(str::trim).filter(|t| !t.is_empty()) {
        let sort = if token == "_" {
            if u.sort_count() != 1 {
                return line.err(1, "`_` argument sort needs a single-sorted universe");
            }
            Sort(0)
        } else {
            u.lookup_sort(token)
                .ok_or_else(|| parse_err(line, format!("unknown sort `{token}`")))?
        };
        arg_sorts.push(sort);
    }
    let mut binding = vec![false; arg_sorts.len()];
    for token in bn_inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let pos: usize = token
            .parse()
            .map_err(|_| parse_err(line, format!("bad bn position `{token}`")))?;
        if pos == 0 || pos > binding.len() {
            return line.err(1, format!("bn position {pos} out of range"));
        }
        binding[pos - 1] = true;
    }
    Ok(ActDecl { name: name.to_string(), arg_sorts, binding })
}

fn parse_act_label(line: &Line, b: &NtsBuilder, token: &str) -> Result<ActLabel> {
    let token = token.trim();
    let (name, args) = match token.split_once('(') {
        Some((n, a)) => {
            let a = a
                .strip_suffix(')')
                .ok_or_else(|| parse_err(line, "unterminated action arguments"))?;
            (n.trim(), a)
        }
        None => (token, ""),
    };
    let ctor = b
        .lookup_act(name)
        .ok_or_else(|| parse_err(line, format!("unknown action `{name}`")))?;
    let mut arg_names = Vec::new();
    for t in args.split(|c| c == ',' || c == ';').map(str::trim).filter(|t| !t.is_empty()) {
        arg_names.push(parse_name(line, b, t)?);
    }
    Ok(ActLabel::new(ctor, arg_names))
}

fn parse_perm(line: &Line, rest: &str, b: &mut NtsBuilder) -> Result<()> {
    // (a b): P -> Pab
    let rest = rest.trim();
    let (pair, mapping) = rest
        .split_once(':')
        .ok_or_else(|| parse_err(line, "expected `(a b): X -> Y`"))?;
    let pair = pair.trim();
    let inner = pair
        .strip_prefix('(')
        .and_then(|p| p.strip_suffix(')'))
        .ok_or_else(|| parse_err(line, "expected a transposition `(a b)`"))?;
    let mut it = inner.split_whitespace();
    let a = parse_name(line, b, it.next().unwrap_or_default())?;
    let nb = parse_name(line, b, it.next().unwrap_or_default())?;
    let (from, to) = mapping
        .split_once("->")
        .ok_or_else(|| parse_err(line, "expected `X -> Y`"))?;
    let (from, to) = (from.trim(), to.trim());
    match (b.lookup_state(from), b.lookup_state(to)) {
        (Some(f), Some(t)) => b.set_state_perm(a, nb, f, t),
        _ => match (b.lookup_pred(from), b.lookup_pred(to)) {
            (Some(f), Some(t)) => b.set_pred_perm(a, nb, f, t),
            _ => line.err(1, format!("unknown state or predicate in `{from} -> {to}`")),
        },
    }
}

fn parse_trans(line: &Line, rest: &str, b: &mut NtsBuilder) -> Result<()> {
    // P --act(args)--> Q
    let (source, rest2) = rest
        .split_once("--")
        .ok_or_else(|| parse_err(line, "expected `P --act--> Q`"))?;
    let (act, target) = rest2
        .split_once("-->")
        .ok_or_else(|| parse_err(line, "expected `P --act--> Q`"))?;
    let source = source.trim();
    let target = target.trim();
    let s = b
        .lookup_state(source)
        .ok_or_else(|| parse_err(line, format!("unknown state `{source}`")))?;
    let t = b
        .lookup_state(target)
        .ok_or_else(|| parse_err(line, format!("unknown state `{target}`")))?;
    let act = parse_act_label(line, b, act)?;
    b.add_trans(s, act, t);
    Ok(())
}

/// Print a system in the `.nts` format; `parse(print(n))` reconstructs it up
/// to interning.
pub fn print(nts: &Nts) -> String {
    let u = nts.universe();
    let mut out = String::new();
    let names: Vec<&str> = u.names().map(|n| u.label(n)).collect();
    let _ = writeln!(out, "universe {}", names.join(" "));
    if u.sort_count() > 1 {
        let mut parts = Vec::new();
        for s in 0..u.sort_count() {
            let members: Vec<&str> = u
                .names_of_sort(Sort(s as u8))
                .map(|n| u.label(n))
                .collect();
            parts.push(format!("{}: {}", u.sort_label(Sort(s as u8)), members.join(" ")));
        }
        let _ = writeln!(out, "sorts {}", parts.join("; "));
    }
    for c in nts.act_ctors() {
        let decl = nts.act_decl(c);
        let sorts: Vec<&str> = decl.arg_sorts.iter().map(|s| u.sort_label(*s)).collect();
        let bn: Vec<String> = decl
            .binding
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        let _ = writeln!(out, "act {}({}) bn{{{}}}", decl.name, sorts.join(","), bn.join(","));
    }
    for s in nts.states() {
        let supp: Vec<&str> = nts.state_support(s).iter().map(|n| u.label(n)).collect();
        let _ = writeln!(out, "state {} supp{{{}}}", nts.state_name(s), supp.join(","));
    }
    for p in nts.preds() {
        let supp: Vec<&str> = nts.pred_support(p).iter().map(|n| u.label(n)).collect();
        let _ = writeln!(out, "pred {} supp{{{}}}", nts.pred_name(p), supp.join(","));
    }
    for (a, b) in transposition_pairs(u) {
        for s in nts.states() {
            let img = nts.transpose_state(a, b, s);
            if img != s {
                let _ = writeln!(
                    out,
                    "perm ({} {}): {} -> {}",
                    u.label(a),
                    u.label(b),
                    nts.state_name(s),
                    nts.state_name(img)
                );
            }
        }
        for p in nts.preds() {
            let img = nts.transpose_pred(a, b, p);
            if img != p {
                let _ = writeln!(
                    out,
                    "perm ({} {}): {} -> {}",
                    u.label(a),
                    u.label(b),
                    nts.pred_name(p),
                    nts.pred_name(img)
                );
            }
        }
    }
    for (s, p) in nts.sat_pairs() {
        let _ = writeln!(out, "sat {} {}", nts.state_name(s), nts.pred_name(p));
    }
    for (s, r) in nts.transitions() {
        let _ = writeln!(
            out,
            "trans {} --{}--> {}",
            nts.state_name(s),
            nts.display_act(&r.act),
            nts.state_name(r.target)
        );
    }
    out
}

fn transposition_pairs(u: &Universe) -> Vec<(Name, Name)> {
    let mut out = Vec::new();
    for a in u.names() {
        for b in u.names() {
            if a < b && u.sort_of(a) == u.sort_of(b) {
                out.push((a, b));
            }
        }
    }
    out
}
