# audit/policy.py
"""Privacy policy parsing and data-flow extraction.

A document becomes heading/body blocks, body blocks become sentences, and
sentences are grouped into chunks under their heading trail. Extractors see
one chunk at a time and return flows that point back at sentence indexes.
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import requests
from bs4 import BeautifulSoup
from django.conf import settings
from lxml import etree
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .artifacts import load_validated
from .exceptions import EmptyDocument, ExtractorResponseError, ParseError, RemoteExtractorError
from .serializers import PolicyVocabularySerializer, RemoteExtractorResponseSerializer, flatten_errors

logger = logging.getLogger(__name__)

DISCLOSURE_VERBS = frozenset({
    'collect', 'use', 'share', 'sell', 'disclose', 'process', 'store', 'retain', 'transfer',
})
SHARING_VERBS = frozenset({'share', 'sell', 'disclose', 'transfer'})
STRIPPED_TAGS = ['script', 'style', 'nav', 'noscript', 'template']
HEADING_TAGS = ['h1', 'h2', 'h3', 'h4', 'h5', 'h6']
BODY_TAGS = ['p', 'li', 'td', 'th', 'dt', 'dd', 'blockquote', 'pre', 'div', 'section', 'article']
NEGATIONS = frozenset({'not', 'never', "don't", "doesn't", "won't", 'cannot', 'no'})
# lxml still flags HTML5 elements it does not know; those are not damage.
IGNORED_HTML_ERRORS = {'HTML_UNKNOWN_TAG'}

_WHITESPACE = re.compile(r'\s+')
_BOUNDARY = re.compile(r'[.!?]+["\')\]]*(?=\s+)')
_TEXT_HEADING = re.compile(r'^(#{1,6})\s+(.*)$')
_EXCLUSION = re.compile(r'\b(?:except|unless)\b[,\s]*(?P<clause>.+?)[\s.;!?]*$')
_PURPOSE = re.compile(
    r'\b(?:in order to|to|for)\s+(?P<clause>.+?)(?=\s*[,;.]|\s+(?:except|unless|with|and share)\b|$)'
)
_RECIPIENT = re.compile(
    r'\b(?:with|to)\s+(?P<name>.+?)(?=\s*[,;.]|\s+(?:except|unless|to|for|when|if|who|that)\b|$)'
)
_SOURCE = re.compile(
    r'\bfrom\s+(?:your\s+|the\s+)?(?P<source>.+?)(?=\s*[,;.]|\s+(?:to|for|and|except|unless|when|with)\b|$)'
)


@dataclass(frozen=True)
class Block:
    level: int  # 0 = body text, 1-6 = heading
    text: str


@dataclass(frozen=True)
class PolicyDocument:
    source: str
    blocks: tuple
    provenance: str = ''
    warnings: tuple = ()


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    section: tuple
    paragraph: int


@dataclass(frozen=True)
class Chunk:
    section: tuple
    sentences: tuple

    @property
    def text(self):
        return ' '.join(sentence.text for sentence in self.sentences)


@dataclass(frozen=True)
class PolicyDataFlow:
    action_verb: str
    sentence: int
    purpose_category: str = ''
    specific_purpose: str = ''
    entity_type: str = 'first party'
    data_types: tuple = ()
    data_sources: tuple = ()
    third_party: bool = False
    third_party_name: str | None = None
    exclusion: str | None = None
    negated: bool = False
    document: str = ''
    sentence_text: str = ''

    def as_dict(self):
        data = asdict(self)
        data['data_types'] = list(self.data_types)
        data['data_sources'] = list(self.data_sources)
        return data

    @property
    def discloses(self):
        return not self.negated and self.action_verb in DISCLOSURE_VERBS


def normalize_space(text):
    return _WHITESPACE.sub(' ', text).strip()


# ---------- Vocabulary ----------

@dataclass(frozen=True)
class PolicyVocabulary:
    verbs: dict  # inflection -> base verb
    data_types: tuple  # longest phrase first
    purposes: dict
    third_party_markers: tuple
    abbreviations: frozenset

    @classmethod
    def load(cls, path=None):
        path = path or settings.AUDITOR['POLICY_VOCABULARY_FILE']
        data = load_validated(path, PolicyVocabularySerializer, field='vocabulary')
        verbs = {}
        for base, forms in data['action_verbs'].items():
            for form in [base, *forms]:
                verbs.setdefault(form.lower(), base.lower())
        phrases = {normalize_space(phrase.lower()) for phrase in data['data_types']}
        return cls(
            verbs=verbs,
            data_types=tuple(sorted(phrases, key=lambda phrase: (-len(phrase), phrase))),
            purposes={name: tuple(p.lower() for p in patterns) for name, patterns in data['purposes'].items()},
            third_party_markers=tuple(marker.lower() for marker in data['third_party_markers']),
            abbreviations=frozenset(item.lower() for item in data['abbreviations']),
        )


# ---------- Documents ----------

def _html_warnings(raw, name):
    parser = etree.HTMLParser(recover=True)
    try:
        etree.fromstring(raw, parser)
    except etree.XMLSyntaxError:
        return []
    errors = [error for error in parser.error_log if error.type_name not in IGNORED_HTML_ERRORS]
    if not errors:
        return []
    message = f"{name}: recovered from {len(errors)} HTML errors (first: line {errors[0].line}: {errors[0].message})"
    logger.warning(message)
    return [message]


def parse_html(raw, source='document'):
    warnings = _html_warnings(raw, source)
    soup = BeautifulSoup(raw, 'lxml')
    for tag in soup(STRIPPED_TAGS):
        tag.decompose()
    root = soup.body or soup
    wanted = HEADING_TAGS + BODY_TAGS
    blocks = []
    taken = set()
    for element in root.find_all(wanted):
        if any(id(parent) in taken for parent in element.parents):
            continue
        # containers only count when they hold no block of their own
        if element.name in ('div', 'section', 'article') and element.find(wanted):
            continue
        taken.add(id(element))
        text = normalize_space(element.get_text(' ', strip=True))
        if not text:
            continue
        level = int(element.name[1]) if element.name in HEADING_TAGS else 0
        blocks.append(Block(level=level, text=text))
    return blocks, warnings


def parse_text(text):
    """Blank-line paragraphs are body blocks; `#` lines are headings."""
    blocks = []
    paragraph = []

    def flush():
        if paragraph:
            blocks.append(Block(level=0, text=normalize_space(' '.join(paragraph))))
            paragraph.clear()

    for line in text.splitlines():
        heading = _TEXT_HEADING.match(line.strip())
        if heading:
            flush()
            if heading.group(2).strip():
                blocks.append(Block(level=len(heading.group(1)), text=normalize_space(heading.group(2))))
        elif not line.strip():
            flush()
        else:
            paragraph.append(line)
    flush()
    return blocks


def parse_document(path, kind):
    """html or text file -> PolicyDocument."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read policy {path}: {exc.strerror}")
    if kind == 'html':
        blocks, warnings = parse_html(raw, path.name)
    elif kind == 'text':
        blocks, warnings = parse_text(raw.decode('utf-8', errors='replace')), []
    else:
        raise ParseError(f"unknown policy kind {kind!r}")
    if not any(block.level == 0 for block in blocks):
        raise EmptyDocument(f"{path.name} has no policy text")
    return PolicyDocument(source=path.name, blocks=tuple(blocks), provenance=str(path), warnings=tuple(warnings))


# ---------- Sentences and chunks ----------

def segment_sentences(text, abbreviations=None):
    """Split on terminal punctuation followed by whitespace, skipping known abbreviations.

    Without an explicit set the shipped vocabulary's abbreviations apply.
    """
    if abbreviations is None:
        abbreviations = PolicyVocabulary.load().abbreviations
    text = normalize_space(text)
    sentences = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        candidate = text[start:match.end()]
        last_word = candidate.rsplit(' ', 1)[-1].lower().lstrip('"\'([').rstrip('"\')]')
        if last_word in abbreviations:
            continue
        if candidate.strip():
            sentences.append(candidate.strip())
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def document_sentences(document, abbreviations=None):
    """Every body sentence with its heading trail and paragraph number."""
    if abbreviations is None:
        abbreviations = PolicyVocabulary.load().abbreviations
    trail = []
    sentences = []
    for paragraph, block in enumerate(document.blocks):
        if block.level:
            while trail and trail[-1][0] >= block.level:
                trail.pop()
            trail.append((block.level, block.text))
            continue
        section = tuple(text for _, text in trail)
        for text in segment_sentences(block.text, abbreviations):
            sentences.append(Sentence(index=len(sentences), text=text, section=section, paragraph=paragraph))
    return sentences


def chunk(sentences, max_sentences=20):
    """Contiguous sentences under one heading trail, packed by paragraph up to the limit."""
    if max_sentences < 1:
        raise ValueError("max_sentences must be at least 1")
    chunks = []
    current = []

    def flush():
        if current:
            chunks.append(Chunk(section=current[0].section, sentences=tuple(current)))
            current.clear()

    paragraphs = []
    for sentence in sentences:
        if paragraphs and paragraphs[-1][0].paragraph == sentence.paragraph:
            paragraphs[-1].append(sentence)
        else:
            paragraphs.append([sentence])

    for paragraph in paragraphs:
        if current and current[0].section != paragraph[0].section:
            flush()
        if len(current) + len(paragraph) <= max_sentences:
            current.extend(paragraph)
            continue
        flush()
        while len(paragraph) > max_sentences:
            chunks.append(Chunk(section=paragraph[0].section, sentences=tuple(paragraph[:max_sentences])))
            paragraph = paragraph[max_sentences:]
        current.extend(paragraph)
    flush()
    return chunks


# ---------- Extractors ----------

def _find_phrases(text, phrases):
    """Non-overlapping whole-word phrase hits, longest phrase first, in text order."""
    taken = []
    hits = []
    for phrase in phrases:
        for match in re.finditer(rf'(?<![\w-]){re.escape(phrase)}(?![\w-])', text):
            span = match.span()
            if any(span[0] < end and start < span[1] for start, end in taken):
                continue
            taken.append(span)
            hits.append((span[0], phrase))
    return [phrase for _, phrase in sorted(hits)]


def _dedupe(items):
    return tuple(dict.fromkeys(items))


class RuleExtractor:
    """Lexicon-driven extraction, one flow per sentence with a verb and a data type."""

    name = 'rule'

    def __init__(self, vocabulary=None):
        self.vocabulary = vocabulary or PolicyVocabulary.load()

    def _verb(self, lower):
        for match in re.finditer(r"[a-z']+", lower):
            base = self.vocabulary.verbs.get(match.group())
            if base:
                return base, match.start(), match.end()
        return None

    def _purpose(self, text):
        for match in _PURPOSE.finditer(text):
            clause = match.group('clause').strip()
            best = None
            for category, patterns in self.vocabulary.purposes.items():
                for pattern in patterns:
                    position = clause.find(pattern)
                    if position >= 0 and (best is None or position < best[0]):
                        best = (position, category)
            if best:
                return best[1], clause
        return '', ''

    def extract_sentence(self, sentence):
        lower = normalize_space(sentence.text.lower())
        verb = self._verb(lower)
        if verb is None:
            return None
        base, verb_start, verb_end = verb

        exclusion_match = _EXCLUSION.search(lower, verb_end)
        exclusion = exclusion_match.group('clause').strip() if exclusion_match else None
        body_end = exclusion_match.start() if exclusion_match else len(lower)
        after = lower[verb_end:body_end]

        category, purpose = self._purpose(after)
        data_scope = after.split(f" {purpose}", 1)[0] if purpose else after
        data_types = _dedupe(_find_phrases(lower[:verb_start] + ' ' + data_scope, self.vocabulary.data_types))
        if not data_types:
            return None

        third_party = any(
            re.search(rf'(?<![\w-]){re.escape(marker)}(?![\w-])', after)
            for marker in self.vocabulary.third_party_markers
        )
        name = None
        recipient = _RECIPIENT.search(after)
        if recipient and not recipient.group('name').startswith(('you', 'your')):
            if base in SHARING_VERBS or third_party:
                third_party = True
                name = recipient.group('name').strip()
                if purpose and name.startswith(purpose):
                    name = None
        sources = _dedupe(match.group('source').strip() for match in _SOURCE.finditer(after))
        preceding = lower[:verb_start].split()[-3:]
        return PolicyDataFlow(
            action_verb=base,
            sentence=sentence.index,
            purpose_category=category,
            specific_purpose=purpose,
            entity_type='third party' if third_party else 'first party',
            data_types=data_types,
            data_sources=sources,
            third_party=third_party,
            third_party_name=name,
            exclusion=exclusion,
            negated=any(word in NEGATIONS for word in preceding),
        )

    def extract_chunk(self, chunk):
        flows = []
        for sentence in chunk.sentences:
            flow = self.extract_sentence(sentence)
            if flow is not None:
                flows.append(flow)
        return flows


class RemoteExtractor:
    """POSTs each chunk as {"section", "sentences"} and expects {"flows": [...]}."""

    name = 'remote'

    def __init__(self, endpoint, token=None, timeout=None, retries=None, max_in_flight=None):
        config = settings.AUDITOR
        self.endpoint = endpoint
        self.timeout = timeout or config['EXTRACTOR_TIMEOUT']
        self.max_in_flight = max(1, max_in_flight or config['EXTRACTOR_MAX_IN_FLIGHT'])
        retries = config['EXTRACTOR_RETRIES'] if retries is None else retries
        self.session = requests.Session()
        token = token if token is not None else config['EXTRACTOR_TOKEN']
        if token:
            self.session.headers['Authorization'] = f"Bearer {token}"
        retry = Retry(
            total=retries,
            backoff_factor=0.5,
            status_forcelist=(429, 502, 503, 504),
            allowed_methods=frozenset({'POST'}),
            raise_on_status=False,
        )
        adapter = HTTPAdapter(max_retries=retry, pool_maxsize=self.max_in_flight)
        self.session.mount('http://', adapter)
        self.session.mount('https://', adapter)

    def extract_chunk(self, chunk):
        payload = {
            'section': list(chunk.section),
            'sentences': [{'id': sentence.index, 'text': sentence.text} for sentence in chunk.sentences],
        }
        try:
            response = self.session.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteExtractorError(f"extractor {self.endpoint} unreachable: {exc}")
        if response.status_code != 200:
            raise RemoteExtractorError(f"extractor {self.endpoint} answered HTTP {response.status_code}")
        try:
            data = response.json()
        except ValueError:
            raise ExtractorResponseError("extractor response is not JSON")

        serializer = RemoteExtractorResponseSerializer(data=data)
        if not serializer.is_valid():
            raise ExtractorResponseError(
                "extractor response rejected: " + "; ".join(flatten_errors(serializer.errors))
            )
        known = {sentence.index for sentence in chunk.sentences}
        flows = []
        for item in serializer.validated_data['flows']:
            if item['sentence'] not in known:
                raise ExtractorResponseError(f"flow refers to sentence {item['sentence']} outside the chunk")
            flows.append(PolicyDataFlow(
                action_verb=item['action_verb'],
                sentence=item['sentence'],
                purpose_category=item['purpose_category'],
                specific_purpose=item['specific_purpose'],
                entity_type=item['entity_type'] or ('third party' if item['third_party'] else 'first party'),
                data_types=_dedupe(item['data_types']),
                data_sources=_dedupe(item['data_sources']),
                third_party=item['third_party'],
                third_party_name=item['third_party_name'] or None,
                exclusion=item['exclusion'] or None,
                negated=item['negated'],
            ))
        return flows

    def extract_all(self, chunks):
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return [flow for flows in pool.map(self.extract_chunk, chunks) for flow in flows]


def extract_flows(chunk, extractor):
    return extractor.extract_chunk(chunk)


def distinct_purposes(flows):
    """(count, sorted list) of case-insensitive purpose categories."""
    purposes = sorted({flow.purpose_category.strip().lower() for flow in flows if flow.purpose_category.strip()})
    return len(purposes), purposes


# ---------- Phase ----------

@dataclass
class PolicyResult:
    documents: list = field(default_factory=list)  # (source, sentences)
    flows: list = field(default_factory=list)
    chunks: int = 0
    extractor: str = 'rule'
    warnings: list = field(default_factory=list)

    def flows_document(self):
        return [flow.as_dict() for flow in self.flows]

    def summary(self):
        count, purposes = distinct_purposes(self.flows)
        return {
            'documents': [
                {'source': source, 'sentences': len(sentences)} for source, sentences in self.documents
            ],
            'chunks': self.chunks,
            'extractor': self.extractor,
            'flows': len(self.flows),
            'disclosing_flows': sum(1 for flow in self.flows if flow.discloses),
            'purposes': count,
            'purpose_list': purposes,
            'third_party_flows': sum(1 for flow in self.flows if flow.third_party),
            'warnings': list(self.warnings),
        }


def _extract_document(chunks, extractor):
    if isinstance(extractor, RemoteExtractor):
        return extractor.extract_all(chunks)
    return [flow for item in chunks for flow in extract_flows(item, extractor)]


def analyze_policies(documents, extractor=None, max_sentences=None, fallback=None, vocabulary=None):
    """[(path, kind)] -> PolicyResult; flows are concatenated in document order."""
    vocabulary = vocabulary or PolicyVocabulary.load()
    extractor = extractor or RuleExtractor(vocabulary)
    max_sentences = max_sentences or settings.AUDITOR['CHUNK_SENTENCES']
    fallback = settings.AUDITOR['EXTRACTOR_FALLBACK'] if fallback is None else fallback
    result = PolicyResult(extractor=extractor.name)
    for path, kind in documents:
        document = parse_document(path, kind)
        result.warnings.extend(document.warnings)
        sentences = document_sentences(document, vocabulary.abbreviations)
        chunks = chunk(sentences, max_sentences)
        result.chunks += len(chunks)
        try:
            flows = _extract_document(chunks, extractor)
        except RemoteExtractorError as exc:
            if not fallback:
                raise
            message = f"{document.source}: {exc}; using the rule-based extractor"
            logger.warning(message)
            result.warnings.append(message)
            flows = _extract_document(chunks, RuleExtractor(vocabulary))
        result.documents.append((document.source, sentences))
        result.flows.extend(
            replace(flow, document=document.source, sentence_text=sentences[flow.sentence].text) for flow in flows
        )
        logger.info(
            "policy %s: %d sentences, %d chunks, %d flows",
            document.source, len(sentences), len(chunks), len(flows),
        )
    return result
