//! Text formats.
//!
//! ```text
//! rules   := (rule)*
//! rule    := atom "<-" atom ("," atom)* "."
//! facts   := (atom ".")*
//! atom    := ident [ "(" [term ("," term)*] ")" ]
//! term    := ident [ "(" [term ("," term)*] ")" ] | quoted
//! ident   := [a-zA-Z_][a-zA-Z0-9_]*
//! quoted  := '"' ( [^"\\] | '\\' any )* '"'
//! ```
//!
//! Whitespace is insignificant; `%` and `#` start a comment running to the
//! end of the line. In `.rules` files identifiers are variables; in `.facts`
//! and `.xfacts` files they are constants. Quoted strings are always
//! constants, which lets generated names such as `"@1"` or `"frz:x"`
//! round-trip. Function terms are only accepted in rule heads and in
//! `.xfacts` files.

use std::fmt::Display;

use crate::error::{Error, Result};
use crate::model::{
    validate_sifo_with, Arities, Const, DataTerm, ExtFact, ExtendedInstance, Fact, Instance,
    RawAtom, RawRule, SifoQuery, Symbol, Term, Var,
};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Quoted(s) => format!("string {s:?}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`<-`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        let tok = match c {
            c if c.is_whitespace() => {
                bump!();
                continue;
            }
            '%' | '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
            '(' => {
                bump!();
                Tok::LParen
            }
            ')' => {
                bump!();
                Tok::RParen
            }
            ',' => {
                bump!();
                Tok::Comma
            }
            '.' => {
                bump!();
                Tok::Dot
            }
            '<' => {
                bump!();
                if chars.peek() != Some(&'-') {
                    return Err(Error::Syntax {
                        line,
                        col,
                        expected: "`-` after `<`".into(),
                    });
                }
                bump!();
                Tok::Arrow
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e) => s.push(e),
                            None => {
                                return Err(Error::Syntax {
                                    line,
                                    col,
                                    expected: "escaped character".into(),
                                })
                            }
                        },
                        Some(ch) => s.push(ch),
                        None => {
                            return Err(Error::Syntax {
                                line: l,
                                col: cl,
                                expected: "closing `\"`".into(),
                            })
                        }
                    }
                }
                Tok::Quoted(s)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => {
                return Err(Error::Syntax {
                    line,
                    col,
                    expected: format!("a token, found `{other}`"),
                })
            }
        };
        out.push(Spanned {
            tok,
            line: l,
            col: cl,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Rules,
    Facts,
    ExtFacts,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        let toks = lex(text)?;
        let line = text.lines().count().max(1);
        let col = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
        Ok(Parser {
            toks,
            pos: 0,
            eof: (line, col),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.eof, |s| (s.line, s.col))
    }

    fn fail<T>(&self, expected: impl Display) -> Result<T> {
        let (line, col) = self.here();
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), Tok::describe);
        Err(Error::Syntax {
            line,
            col,
            expected: format!("{expected}, found {found}"),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.fail(tok.describe())
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("an identifier"),
        }
    }

    fn args(&mut self, mode: Mode) -> Result<Vec<Term>> {
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                args.push(self.term(mode)?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return self.fail("`,` or `)`");
                }
            }
        }
        Ok(args)
    }

    fn term(&mut self, mode: Mode) -> Result<Term> {
        match self.peek() {
            Some(Tok::Quoted(s)) => {
                let c = Const::new(s);
                self.pos += 1;
                Ok(Term::Const(c))
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                if self.peek() == Some(&Tok::LParen) {
                    if mode == Mode::Facts {
                        return self.fail("a constant (function terms need an .xfacts file)");
                    }
                    let args = self.args(mode)?;
                    Ok(Term::App(Symbol::new(name), args))
                } else if mode == Mode::Rules {
                    Ok(Term::Var(Var::new(name)))
                } else {
                    Ok(Term::Const(Const::new(name)))
                }
            }
            _ => self.fail("a term"),
        }
    }

    fn atom(&mut self, mode: Mode) -> Result<RawAtom> {
        let pred = Symbol::new(self.ident()?);
        let args = self.args(mode)?;
        Ok(RawAtom { pred, args })
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

/// Parses raw rules without validating their structure.
pub fn parse_raw_rules(text: &str) -> Result<Vec<((usize, usize), RawRule)>> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    while !p.at_end() {
        let at = p.here();
        let head = p.atom(Mode::Rules)?;
        p.expect(Tok::Arrow)?;
        let mut body = vec![p.atom(Mode::Rules)?];
        loop {
            if p.eat(&Tok::Dot) {
                break;
            }
            if !p.eat(&Tok::Comma) {
                return p.fail("`,` or `.`");
            }
            body.push(p.atom(Mode::Rules)?);
        }
        rules.push((at, RawRule { head, body }));
    }
    Ok(rules)
}

/// Parses and validates every rule of a `.rules` text. Arities are shared
/// across the rules of one text.
pub fn parse_rules(text: &str) -> Result<Vec<SifoQuery>> {
    let mut arities = Arities::new();
    parse_raw_rules(text)?
        .into_iter()
        .map(|((line, col), raw)| {
            validate_sifo_with(&raw, &mut arities).map_err(|e| e.at(line, col))
        })
        .collect()
}

/// Parses a text that must contain exactly one rule.
pub fn parse_rule(text: &str) -> Result<SifoQuery> {
    let mut rules = parse_rules(text)?;
    if rules.len() != 1 {
        return Err(Error::RuleCount(rules.len()));
    }
    Ok(rules.remove(0))
}

fn fact_atoms(text: &str, mode: Mode) -> Result<Vec<((usize, usize), RawAtom)>> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while !p.at_end() {
        let at = p.here();
        let atom = p.atom(mode)?;
        p.expect(Tok::Dot)?;
        out.push((at, atom));
    }
    Ok(out)
}

/// Parses a `.facts` text. Duplicate facts collapse.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut inst = Instance::new();
    for ((line, col), a) in fact_atoms(text, Mode::Facts)? {
        let args = a
            .args
            .into_iter()
            .map(|t| match t {
                Term::Const(c) => c,
                _ => unreachable!("fact mode yields constants only"),
            })
            .collect::<Vec<_>>();
        inst.insert(Fact::new(a.pred, args))
            .map_err(|e| e.at(line, col))?;
    }
    Ok(inst)
}

fn data_term(t: Term) -> DataTerm {
    match t {
        Term::Const(c) => DataTerm::Const(c),
        Term::App(s, args) => DataTerm::Oid(s, args.into_iter().map(data_term).collect()),
        Term::Var(_) => unreachable!("fact mode yields no variables"),
    }
}

/// Parses an `.xfacts` text.
pub fn parse_extended_instance(text: &str) -> Result<ExtendedInstance> {
    let mut arities = Arities::new();
    let mut facts = Vec::new();
    for ((line, col), a) in fact_atoms(text, Mode::ExtFacts)? {
        arities
            .check(&a.pred, a.args.len())
            .map_err(|e| e.at(line, col))?;
        facts.push(ExtFact::new(a.pred, a.args.into_iter().map(data_term)));
    }
    ExtendedInstance::try_from_facts(facts)
}

/// Renders facts one per line, sorted by predicate and then by rendered
/// arguments.
pub(crate) fn sorted_lines<'a, F, A>(facts: impl Iterator<Item = &'a F>) -> Vec<String>
where
    F: FactLike<Arg = A> + 'a,
    A: Display + 'a,
{
    let mut keyed: Vec<(&str, Vec<String>)> = facts
        .map(|f| {
            (
                f.pred().as_str(),
                f.fact_args().iter().map(|a| a.to_string()).collect(),
            )
        })
        .collect();
    keyed.sort();
    keyed
        .into_iter()
        .map(|(p, args)| format!("{p}({}).", args.join(",")))
        .collect()
}

pub(crate) trait FactLike {
    type Arg;
    fn pred(&self) -> &Symbol;
    fn fact_args(&self) -> &[Self::Arg];
}

impl FactLike for Fact {
    type Arg = Const;
    fn pred(&self) -> &Symbol {
        &self.pred
    }
    fn fact_args(&self) -> &[Const] {
        &self.args
    }
}

impl FactLike for ExtFact {
    type Arg = DataTerm;
    fn pred(&self) -> &Symbol {
        &self.pred
    }
    fn fact_args(&self) -> &[DataTerm] {
        &self.args
    }
}

fn join_lines(lines: Vec<String>) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

pub fn serialize_instance(inst: &Instance) -> String {
    join_lines(sorted_lines(inst.iter()))
}

pub fn serialize_extended_instance(inst: &ExtendedInstance) -> String {
    join_lines(sorted_lines(inst.iter()))
}

pub fn serialize_rules<'a>(rules: impl IntoIterator<Item = &'a SifoQuery>) -> String {
    join_lines(rules.into_iter().map(|q| q.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_family_rule() {
        let q = parse_rule("T(x,f(y)) <- R(x,y,z).").unwrap();
        assert_eq!(q.to_string(), "T(x,f(y)) <- R(x,y,z).");
        assert_eq!(q.creation(), &[Var::new("y")]);
    }

    #[test]
    fn comments_are_ignored() {
        let q = parse_rules("% comment\n# another\nT(x,f(y)) <- R(x,y,z). % trailing\n").unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn unbalanced_parenthesis_is_a_syntax_error() {
        let e = parse_rules("T(x,f(y) <- R(x,y,z).").unwrap_err();
        match e {
            Error::Syntax {
                line,
                col,
                expected,
            } => {
                assert_eq!((line, col), (1, 10));
                assert!(expected.contains("`,` or `)`"), "{expected}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_errors_carry_location() {
        let e = parse_rules("T(x,f(y)) <- R(x,y,z).\n  T(w,f(x)) <- R(x,y,z).").unwrap_err();
        assert_eq!(
            e,
            Error::Located {
                line: 2,
                col: 3,
                source: Box::new(Error::UnsafeVariable("w".into()))
            }
        );
    }

    #[test]
    fn arities_enforced_across_rules() {
        let e = parse_rules("T(x,f(y)) <- R(x,y).\nT(x,f(y)) <- R(x,y,z).").unwrap_err();
        assert!(matches!(e.kind(), Error::ArityClash { .. }));
    }

    #[test]
    fn quoted_constants_in_rules_rejected() {
        let e = parse_rule("T(x,f(y)) <- R(x,y,\"a\").").unwrap_err();
        assert_eq!(e.kind(), &Error::ConstantInRule("a".into()));
    }

    #[test]
    fn rule_count() {
        assert_eq!(parse_rule("").unwrap_err(), Error::RuleCount(0));
    }

    #[test]
    fn instance_parsing() {
        let i = parse_instance("R(a,b,c). R(a,b,d). R(c,b,d). R(d,c,a).").unwrap();
        assert_eq!(i.len(), 4);
        assert_eq!(parse_instance("R(a,b,c). R(a,b,c).").unwrap().len(), 1);
        let e = parse_instance("R(a,b). R(a,b,c).").unwrap_err();
        assert!(matches!(e.kind(), Error::ArityClash { .. }));
        assert!(parse_instance("R(f(a)).").is_err());
        assert!(parse_instance("R(a)").is_err());
    }

    #[test]
    fn quoted_constants_round_trip() {
        let i = parse_instance("T(a,\"@1\"). R(\"frz:x\",\"q\\\"t\").").unwrap();
        let text = serialize_instance(&i);
        assert_eq!(parse_instance(&text).unwrap(), i);
    }

    #[test]
    fn extended_serialization() {
        let j = parse_extended_instance("T(d,f(c)). T(a,f(b)). T(c,f(b)).").unwrap();
        assert_eq!(
            serialize_extended_instance(&j),
            "T(a,f(b)).\nT(c,f(b)).\nT(d,f(c)).\n"
        );
        assert_eq!(serialize_extended_instance(&ExtendedInstance::new()), "");
        let j = parse_extended_instance("Family(beth,f(anne,adam)).").unwrap();
        assert_eq!(
            serialize_extended_instance(&j),
            "Family(beth,f(anne,adam)).\n"
        );
    }

    #[test]
    fn nullary_atoms() {
        let i = parse_instance("P. P(). Q(a).").unwrap();
        assert_eq!(i.len(), 2);
        let q = parse_rule("T(f()) <- P, Q(x).").unwrap();
        assert_eq!(q.to_string(), "T(f()) <- P(), Q(x).");
    }
}
