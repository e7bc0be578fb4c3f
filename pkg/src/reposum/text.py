"""Deterministic text utilities: tokenization, feature hashing, keyword heuristics."""

from __future__ import annotations

import hashlib
import math
import re

import numpy as np

from .errors import EmbedderError

_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")

EMBED_DIM = 256


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; camelCase and snake_case identifiers are split."""
    return [t.lower() for t in _CAMEL.findall(text)]


def hash_bucket(token: str, dim: int = EMBED_DIM) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def hashed_features(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    tokens = tokenize(text)
    vec = np.zeros(dim)
    for tok in tokens:
        vec[hash_bucket(tok, dim)] += 1.0
    for a, b in zip(tokens, tokens[1:]):
        vec[hash_bucket(f"{a} {b}", dim)] += 1.0
    return vec


class HashingEmbedder:
    """Offline embedder: unigram+bigram counts hashed into ``dim`` buckets, L2-normalized."""

    name = "hashing"

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = hashed_features(text, self.dim)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmbedderError(f"text has no tokens after normalization: {text!r}")
        return vec / norm


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


# Keyword heuristics used by the offline judges.

STOPWORDS = frozenset(
    """
    a an the and or but if then else of to in on at by for with from into onto as is are was were be
    been being this that these those it its their his her our your my all any each every some no not
    can could should would will shall may might must do does did done has have had via per new get
    set use uses using used so such than too very also only just more most less least other another
    which who whom whose what when where why how user users system systems feature features stub
    summary implements groups method methods file files class value values data info information
    one two three given based able way part own etc e g i ie
    """.split()
)

VERBS = frozenset(
    """
    add adds added adding create creates created creating make makes build builds generate generates
    delete deletes deleted deleting remove removes removed removing drop drops
    update updates updated updating edit edits edited editing modify modifies modified change changes
    view views viewed viewing show shows display displays list lists listing browse
    retrieve retrieves retrieved retrieving fetch fetches load loads read reads find finds search searches
    query queries look lookup select selects
    save saves saved saving store stores write writes persist persists
    send sends sent sending notify notifies receive receives
    validate validates validating check checks verify verifies confirm confirms
    login logs authenticate authenticates authorize authorizes register registers
    schedule schedules cancel cancels assign assigns approve approves reject rejects
    compute computes calculate calculates count counts sum sums sort sorts filter filters
    parse parses format formats convert converts render renders print prints export exports import imports
    upload uploads download downloads open opens close closes start starts stop stops run runs
    manage manages managing handle handles process processes track tracks monitor monitors
    reset resets increment increments decrement decrements initialize initializes configure configures
    """.split()
)

_VERB_STEMS = {
    "adds": "add", "added": "add", "adding": "add", "creates": "create", "created": "create",
    "creating": "create", "makes": "make", "builds": "build", "generates": "generate",
    "deletes": "delete", "deleted": "delete", "deleting": "delete", "removes": "remove",
    "removed": "remove", "removing": "remove", "drops": "drop", "updates": "update",
    "updated": "update", "updating": "update", "edits": "edit", "edited": "edit", "editing": "edit",
    "modifies": "modify", "modified": "modify", "changes": "change", "views": "view",
    "viewed": "view", "viewing": "view", "shows": "show", "displays": "display", "lists": "list",
    "listing": "list", "retrieves": "retrieve", "retrieved": "retrieve", "retrieving": "retrieve",
    "fetches": "fetch", "loads": "load", "reads": "read", "finds": "find", "searches": "search",
    "queries": "query", "selects": "select", "saves": "save", "saved": "save", "saving": "save",
    "stores": "store", "writes": "write", "persists": "persist", "sends": "send", "sent": "send", "sending": "send", "notifies": "notify", "receives": "receive", "validates": "validate", "validating": "validate",
    "checks": "check", "verifies": "verify", "confirms": "confirm", "authenticates": "authenticate",
    "authorizes": "authorize", "registers": "register", "schedules": "schedule", "cancels": "cancel", "assigns": "assign", "approves": "approve", "rejects": "reject",
    "computes": "compute", "calculates": "calculate", "counts": "count", "sums": "sum",
    "sorts": "sort", "filters": "filter", "parses": "parse", "formats": "format",
    "converts": "convert", "renders": "render", "prints": "print", "exports": "export",
    "imports": "import", "uploads": "upload", "downloads": "download", "opens": "open",
    "closes": "close", "starts": "start", "stops": "stop", "runs": "run", "manages": "manage",
    "managing": "manage", "handles": "handle", "processes": "process", "tracks": "track",
    "monitors": "monitor", "resets": "reset", "increments": "increment", "decrements": "decrement",
    "initializes": "initialize", "configures": "configure",
}


def _singular(word: str) -> str:
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def keyword_sets(text: str) -> tuple[frozenset[str], frozenset[str]]:
    """(entities, operations) by a lexicon heuristic: verbs from a fixed lexicon,
    every other non-stopword token of length > 2 treated as an entity noun."""
    entities, ops = set(), set()
    for tok in tokenize(text):
        if tok in VERBS:
            ops.add(_VERB_STEMS.get(tok, tok))
        elif tok not in STOPWORDS and len(tok) > 2 and not tok.isdigit():
            entities.add(_singular(tok))
    return frozenset(entities), frozenset(ops)
