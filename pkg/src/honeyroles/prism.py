"""PRISM DTMC export and a structural checker for the emitted text.

The exported model follows the simulator's round structure with a global
``sched`` phase counter:

    0 type, 1 role, 2 source, 3 destination, 4 path      (Defender)
    5/6 observe and decide                               (Adversary)
    7 record honey events, 9 belief update, 10 reset     (System)
    8 next connection                                    (Defender)
    11 confidence update                                 (Adversary)
    12 next round, 13 done                               (System)

Belief counters restart at 1 every round and the risk is kept as a rounded
percentage, which is how the model checker sees it. The simulator's own
defaults differ (see ``BeliefTable``).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import sympy

from .engine import SimConfig, World, adversary_config, sample_seed
from .enterprise import HostRegistry
from .model import HostKind
from .topology import Path, Topology


class PrismExportError(ValueError):
    pass


@dataclass(frozen=True)
class GuardedCommand:
    guard: str
    updates: tuple[tuple[str | None, str], ...]
    label: str = ""

    def render(self) -> str:
        if len(self.updates) == 1 and self.updates[0][0] is None:
            body = self.updates[0][1]
        else:
            body = "\n    + ".join(f"{w}: {u}" for w, u in self.updates)
        return f"[{self.label}] {self.guard} -> {body};"


@dataclass(frozen=True)
class PrismModel:
    text: str
    command_count: int
    module_names: tuple[str, ...]
    path_count: int = 0


def _frac(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _assign(**kv) -> str:
    return " & ".join(f"({k}'={v})" for k, v in kv.items())


def _uniform(items: Sequence[str]) -> tuple[tuple[str, str], ...]:
    w = _frac(Fraction(1, len(items)))
    return tuple((w, u) for u in items)


def used_pairs(registry: HostRegistry, roles: int) -> list[tuple[int, int]]:
    """Every (client edge, server edge) pair some connection can take."""
    pairs = set()
    for role in range(roles):
        dst = {h.switch for h in registry if h.server and h.role == role}
        src = {h.switch for h in registry if not h.server and h.role == role}
        pairs.update((a, b) for a in src for b in dst)
    return sorted(pairs)


def path_table(topo: Topology, registry: HostRegistry, cfg: SimConfig) -> dict[tuple[int, int], list[Path]]:
    return {(a, b): topo.paths(a, b, cfg.path_policy) for a, b in used_pairs(registry, cfg.roles)}


def _registry_for(cfg: SimConfig, topo: Topology) -> HostRegistry:
    # honey placement is random; export the layout of sample 0
    return World(cfg, topo, sample_seed(cfg.master_seed, 0)).registry


def emit_model(cfg: SimConfig, topo: Topology,
               paths: Mapping[tuple[int, int], Sequence[Path]] | None = None,
               hosts: HostRegistry | None = None) -> PrismModel:
    registry = hosts if hosts is not None else _registry_for(cfg, topo)
    if paths is None:
        paths = path_table(topo, registry, cfg)
    pairs = used_pairs(registry, cfg.roles)
    for pair in pairs:
        if not paths.get(pair):
            raise PrismExportError(f"no forwarding path for used pair {pair}")

    n = topo.num_switches
    aconf = adversary_config(cfg, topo)
    compromised = aconf.compromised if aconf else frozenset()
    hosts_list = list(registry)
    name = {h.id: f"h{h.id + 1}" for h in hosts_list}
    tags: list[tuple[int, Path]] = []
    pair_tags: dict[tuple[int, int], list[int]] = {}
    for pno, pair in enumerate(pairs):
        plist = list(paths[pair])
        if len(plist) >= 1000:
            raise PrismExportError(f"too many paths for pair {pair}")
        pair_tags[pair] = []
        for i, p in enumerate(plist):
            tag = 1000 * (pno + 1) + i
            tags.append((tag, tuple(p)))
            pair_tags[pair].append(tag)
    max_tag = max(t for t, _ in tags)
    cap_count = cfg.round_length + 1
    beta = cfg.beta

    out: list[str] = ["dtmc", ""]
    # flowRatio is the percentage of real connections
    out.append(f"const int flowRatio = {round((1 - cfg.honey_ratio) * 100)};")
    out.append(f"const int maxIteration = {cfg.round_length};")
    out.append(f"const int maxRound = {cfg.rounds};")
    for r in range(cfg.roles):
        out.append(f"const int role{r} = {r + 1};")
    out.append(f"const int targetRole = role{cfg.target_role};")
    for h in hosts_list:
        out.append(f"const int {name[h.id]} = {h.id + 1};")
        out.append(f"const int {name[h.id]}sw = {h.switch};")
    out.append("")
    out.append("global sched : [0..13] init 0;")
    out.append("")
    out.append("// one formula per enumerated forwarding path")
    for tag, p in tags:
        out.append(f"formula path_{tag} = (currentPath={tag}); // {'-'.join(f'sw{k}' for k in p)}")
    seen_paths = [f"path_{t}" for t, p in tags if compromised.intersection(p)]
    out.append(f"formula visible = {' | '.join(seen_paths) if seen_paths else 'false'};")
    out.append("formula seen = visible & roleType=targetRole;")
    out.append("")

    commands = 0

    def module(title: str, decls: list[str], cmds: list[GuardedCommand]):
        nonlocal commands
        out.append(f"module {title}")
        out.extend(f"  {d}" for d in decls)
        out.append("")
        for c in cmds:
            out.append("  " + c.render())
        out.append("endmodule")
        out.append("")
        commands += len(cmds)

    # Defender
    reset = _assign(flowType=0, roleType=0, sourceID=0, sourceSW=0,
                    destinationID=0, destinationSW=0, currentPath=0)
    d_cmds = [
        GuardedCommand("sched=0 & flowType=0", (
            ("(flowRatio/100)", _assign(flowType=1, sched=1)),
            ("(1-flowRatio/100)", _assign(flowType=2, sched=1)),
        )),
        GuardedCommand("sched=1", _uniform([_assign(roleType=f"role{r}", sched=2)
                                             for r in range(cfg.roles)])),
    ]
    for kind in (HostKind.REAL, HostKind.HONEY):
        for r in range(cfg.roles):
            members = [h for h in hosts_list if not h.server and h.kind is kind and h.role == r]
            if not members:
                raise PrismExportError(f"role {r} has no {kind.name.lower()} client")
            d_cmds.append(GuardedCommand(
                f"sched=2 & sourceID=0 & count<maxIteration & flowType={int(kind)} & roleType=role{r}",
                _uniform([_assign(sourceID=name[h.id], sourceSW=f"{name[h.id]}sw", sched=3)
                          for h in members])))
    for r in range(cfg.roles):
        servers = [h for h in hosts_list if h.server and h.role == r]
        d_cmds.append(GuardedCommand(
            f"sched=3 & destinationID=0 & roleType=role{r}",
            _uniform([_assign(destinationID=name[h.id], destinationSW=f"{name[h.id]}sw", sched=4)
                      for h in servers])))
    for (a, b), tl in pair_tags.items():
        d_cmds.append(GuardedCommand(
            f"sched=4 & sourceSW={a} & destinationSW={b}",
            _uniform([_assign(currentPath=t, sched=5) for t in tl])))
    d_cmds.append(GuardedCommand("sched=8 & count<maxIteration-1",
                                 ((None, f"(count'=count+1) & {reset} & (sched'=0)"),)))
    d_cmds.append(GuardedCommand("sched=8 & count=maxIteration-1",
                                 ((None, f"(count'=0) & {reset} & (sched'=9)"),)))
    max_host = max(h.id for h in hosts_list) + 1
    module("Defender", [
        "flowType : [0..2] init 0;",
        f"roleType : [0..{cfg.roles}] init 0;",
        f"sourceID : [0..{max_host}] init 0;",
        f"sourceSW : [0..{n - 1}] init 0;",
        f"destinationID : [0..{max_host}] init 0;",
        f"destinationSW : [0..{n - 1}] init 0;",
        f"currentPath : [0..{max_tag}] init 0;",
        "count : [0..maxIteration] init 0;",
    ], d_cmds)

    # System
    s_cmds = [GuardedCommand("sched=7 & flowType=1", ((None, "(sched'=8)"),))]
    for tag, p in tags:
        counts = " & ".join(f"(count_sw{k}'=min(count_sw{k}+1,{cap_count}))" for k in p)
        alarms = " & ".join(f"(ae_sw{k}'=min(ae_sw{k}+1,{cap_count}))" for k in p)
        s_cmds.append(GuardedCommand(f"sched=7 & flowType=2 & path_{tag} & attack",
                                     ((None, f"{counts} & {alarms} & (sched'=8)"),)))
        s_cmds.append(GuardedCommand(f"sched=7 & flowType=2 & path_{tag} & !attack",
                                     ((None, f"{counts} & (sched'=8)"),)))
    keep, gain = repr(round(1 - beta, 12)), repr(round(beta, 12))
    belief = " & ".join(
        f"(bi_sw{k}'=round((((bi_sw{k}/100)*{keep})+((ae_sw{k}/(count_sw{k}))*{gain}))*100))"
        for k in range(n))
    s_cmds.append(GuardedCommand("sched=9", ((None, f"{belief} & (sched'=10)"),)))
    reinit = " & ".join(f"(count_sw{k}'=1) & (ae_sw{k}'=1)" for k in range(n))
    s_cmds.append(GuardedCommand("sched=10", ((None, f"{reinit} & (sched'=11)"),)))
    s_cmds.append(GuardedCommand("sched=12 & rnd<maxRound-1", ((None, "(rnd'=rnd+1) & (sched'=0)"),)))
    s_cmds.append(GuardedCommand("sched=12 & rnd=maxRound-1", ((None, "(rnd'=maxRound) & (sched'=13)"),)))
    s_cmds.append(GuardedCommand("sched=13", ((None, "true"),)))
    s_decls = ["rnd : [0..maxRound] init 0;"]
    for k in range(n):
        s_decls.append(f"count_sw{k} : [0..{cap_count}] init 1;")
        s_decls.append(f"ae_sw{k} : [0..{cap_count}] init 1;")
        s_decls.append(f"bi_sw{k} : [0..100] init 0;")
    module("System", s_decls, s_cmds)

    # Adversary
    cap = cfg.confidence_cap
    inc = Fraction(2, 3)
    a_cmds = [
        GuardedCommand("sched=5 & !seen", ((None, "(attack'=false) & (sched'=7)"),)),
        GuardedCommand("sched=5 & seen", (
            ("(confidence/100)", "(beliefObservation'=true) & (sched'=6)"),
            ("(1-confidence/100)", "(beliefObservation'=false) & (sched'=6)"),
        )),
        GuardedCommand("sched=6 & beliefObservation=true & flowType=1",
                       ((None, "(attack'=true) & (sched'=7)"),)),
        GuardedCommand("sched=6 & beliefObservation=false & flowType=2",
                       ((None, "(attack'=true) & (sched'=7)"),)),
        GuardedCommand("sched=6 & beliefObservation=false & flowType=1",
                       ((None, "(attack'=false) & (sched'=7)"),)),
        GuardedCommand("sched=6 & beliefObservation=true & flowType=2",
                       ((None, "(attack'=false) & (sched'=7)"),)),
        GuardedCommand(f"sched=11 & confidence<{cap}", (
            (_frac(inc), "(confidence'=confidence+1) & (sched'=12)"),
            (_frac(1 - inc), "(confidence'=max(0,confidence-1)) & (sched'=12)"),
        )),
        GuardedCommand(f"sched=11 & confidence>={cap}", (
            ("1/2", "(sched'=12)"),
            ("1/2", "(confidence'=confidence-1) & (sched'=12)"),
        )),
    ]
    module("Adversary", [
        f"confidence: int init {cfg.confidence_init};",
        "beliefObservation : bool init false;",
        "attack : bool init false;",
    ], a_cmds)

    return PrismModel("\n".join(out), commands, ("Defender", "System", "Adversary"), len(tags))


# ---------------------------------------------------------------- checking

_KEYWORDS = {"true", "false", "round", "min", "max", "floor", "ceil", "pow", "mod", "log"}
_IDENT = re.compile(r"[A-Za-z_]\w*")
_DECL = re.compile(r"^(?:global\s+)?([A-Za-z_]\w*)\s*:\s*(\[[^\]]*\]|bool|int)\s*(?:init\s+(.+))?$")


@dataclass
class Violation:
    kind: str
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.kind}: {self.message}"


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _statements(text: str):
    """Yield (line_number, statement, module) with comments stripped."""
    buf, start, module = [], None, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        if not buf:
            m = re.fullmatch(r"module\s+(\w+)", line)
            if m:
                module = m.group(1)
                yield no, f"module {module}", module
                continue
            if line == "endmodule":
                yield no, "endmodule", module
                module = None
                continue
            if line in ("dtmc", "mdp", "ctmc"):
                yield no, line, None
                continue
            start = no
        buf.append(line)
        if line.endswith(";"):
            yield start, " ".join(buf)[:-1].strip(), module
            buf = []
    if buf:
        yield start, " ".join(buf), module


def _weight_sum_is_one(weights: list[str], consts: dict[str, int]) -> bool:
    names = set()
    for w in weights:
        names.update(_IDENT.findall(w))
    local = {k: sympy.Symbol(k) for k in names}
    total = sum(sympy.sympify(w, locals=local) for w in weights)
    total = total.subs({local[k]: v for k, v in consts.items() if k in local})
    return sympy.simplify(total - 1) == 0


def check_model(model: PrismModel | str) -> list[Violation]:
    text = model.text if isinstance(model, PrismModel) else model
    out: list[Violation] = []
    declared: set[str] = set()
    consts: dict[str, int] = {}
    commands: list[tuple[int, str]] = []
    formulas: list[tuple[int, str, str]] = []
    modules: list[str] = []
    open_module = False

    for no, stmt, module in _statements(text):
        if stmt.startswith("module "):
            if open_module:
                out.append(Violation("syntax", no, "nested module"))
            open_module = True
            modules.append(stmt.split()[1])
            continue
        if stmt == "endmodule":
            if not open_module:
                out.append(Violation("syntax", no, "endmodule without module"))
            open_module = False
            continue
        if stmt in ("dtmc", "mdp", "ctmc"):
            continue
        if stmt.startswith("const "):
            m = re.fullmatch(r"const\s+(?:int|double|bool)\s+(\w+)\s*=\s*(.+)", stmt)
            if not m:
                out.append(Violation("syntax", no, f"bad constant {stmt!r}"))
                continue
            cname, value = m.groups()
            for ident in _IDENT.findall(value):
                if ident not in declared and ident not in _KEYWORDS:
                    out.append(Violation("unknown-identifier", no, ident))
            declared.add(cname)
            try:
                consts[cname] = int(value) if value.lstrip("-").isdigit() else consts[value]
            except KeyError:
                pass
            continue
        if stmt.startswith("formula "):
            m = re.fullmatch(r"formula\s+(\w+)\s*=\s*(.+)", stmt)
            if not m:
                out.append(Violation("syntax", no, f"bad formula {stmt!r}"))
                continue
            formulas.append((no, m.group(1), m.group(2)))
            declared.add(m.group(1))
            continue
        if stmt.startswith("["):
            commands.append((no, stmt))
            continue
        m = _DECL.match(stmt)
        if m:
            declared.add(m.group(1))
            continue
        out.append(Violation("syntax", no, f"unrecognised statement {stmt!r}"))
    if open_module:
        out.append(Violation("syntax", 0, "unterminated module"))

    for required in ("Defender", "System", "Adversary"):
        if required not in modules:
            out.append(Violation("missing-module", 0, required))

    def unknown(no: int, expr: str):
        for ident in _IDENT.findall(expr.replace("'", "")):
            if ident not in declared and ident not in _KEYWORDS:
                out.append(Violation("unknown-identifier", no, ident))

    tags: Counter[int] = Counter()
    first_line: dict[int, int] = {}
    for no, fname, body in formulas:
        unknown(no, body)
        if fname.startswith("path_"):
            m = re.fullmatch(r"\(\s*currentPath\s*=\s*(\d+)\s*\)", body)
            tag = int(m.group(1)) if m else None
            if tag is not None:
                tags[tag] += 1
                first_line.setdefault(tag, no)
    for tag, count in tags.items():
        if count > 1:
            out.append(Violation("duplicate-path-tag", first_line[tag], f"tag {tag} used {count} times"))

    for no, stmt in commands:
        m = re.fullmatch(r"\[(\w*)\]\s*(.+?)\s*->\s*(.+)", stmt)
        if not m:
            out.append(Violation("syntax", no, f"bad command {stmt!r}"))
            continue
        _, guard, body = m.groups()
        unknown(no, guard)
        updates = [u.strip() for u in _split_top(body, "+")]
        weights = []
        for u in updates:
            pieces = _split_top(u, ":")
            if len(pieces) == 1:
                weights.append("1")
                unknown(no, pieces[0])
            else:
                weights.append(pieces[0].strip())
                unknown(no, pieces[0])
                unknown(no, ":".join(pieces[1:]))
        try:
            ok = _weight_sum_is_one(weights, consts)
        except (sympy.SympifyError, TypeError, SyntaxError):
            out.append(Violation("syntax", no, f"unparseable weights {weights}"))
            continue
        if not ok:
            out.append(Violation("weight-sum", no, " + ".join(weights) + " != 1"))
    return out
