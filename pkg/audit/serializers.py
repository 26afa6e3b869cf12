# audit/serializers.py
"""Schemas for every JSON document the auditor reads, plus the run-history API.

Analysis code never trusts a raw ``json.load``: data files, flow exports,
remote extractor answers and run configs all pass through one of these first.
"""
import ipaddress
import re
from pathlib import Path

from rest_framework import serializers

from .models import AnalysisRun
from .vhal import PropertyCategory

CATEGORY_CODES = [c.code for c in PropertyCategory if c is not PropertyCategory.UNCATEGORIZED]
FLOW_FIELDS = ['method', 'url', 'headers', 'body']


def flatten_errors(detail, prefix=''):
    """DRF error detail -> ["field.sub[0].x: message", ...]."""
    messages = []
    if isinstance(detail, dict):
        for key, value in detail.items():
            name = prefix if key == 'non_field_errors' else (f"{prefix}.{key}" if prefix else str(key))
            messages.extend(flatten_errors(value, name))
    elif isinstance(detail, list):
        if all(not isinstance(item, (dict, list)) for item in detail):
            messages.extend(f"{prefix}: {item}" if prefix else str(item) for item in detail)
        else:
            for index, item in enumerate(detail):
                if item:
                    messages.extend(flatten_errors(item, f"{prefix}[{index}]"))
    else:
        messages.append(f"{prefix}: {detail}" if prefix else str(detail))
    return messages


# ---------- Data files ----------

class LexiconRuleSerializer(serializers.Serializer):
    tokens = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    category = serializers.ChoiceField(choices=CATEGORY_CODES)
    priority = serializers.IntegerField(default=0)


class CatalogObjectSerializer(serializers.Serializer):
    """Object form of a catalog value: {"name": ..., "description": ...}."""

    name = serializers.CharField(required=False, allow_blank=True, default='')
    description = serializers.CharField()


class DestinationSerializer(serializers.Serializer):
    cidr = serializers.CharField()
    org = serializers.CharField()

    def validate_cidr(self, value):
        try:
            return ipaddress.ip_network(value, strict=False)
        except ValueError:
            raise serializers.ValidationError(f"{value!r} is not a valid CIDR.")


class DetectorSerializer(serializers.Serializer):
    id = serializers.CharField()
    pattern = serializers.CharField()
    targets = serializers.MultipleChoiceField(choices=FLOW_FIELDS, default=set(FLOW_FIELDS))
    ignore_case = serializers.BooleanField(default=False)

    def validate(self, attrs):
        flags = re.IGNORECASE if attrs['ignore_case'] else 0
        try:
            attrs['compiled'] = re.compile(attrs['pattern'], flags)
        except re.error as exc:
            raise serializers.ValidationError({'pattern': f"invalid pattern: {exc}"})
        return attrs


class TaxonomyEntrySerializer(serializers.Serializer):
    name = serializers.CharField()
    keywords = serializers.ListField(child=serializers.CharField(), default=list)
    categories = serializers.ListField(
        child=serializers.ChoiceField(choices=CATEGORY_CODES), default=list
    )
    policy_only = serializers.BooleanField(default=False)

    def validate(self, attrs):
        if not (attrs['categories'] or attrs['keywords'] or attrs['policy_only']):
            raise serializers.ValidationError(
                "entry must map to a property category, carry keywords, or be policy_only."
            )
        return attrs


class TaxonomySerializer(serializers.Serializer):
    stopwords = serializers.ListField(child=serializers.CharField(), default=list)
    categories = TaxonomyEntrySerializer(many=True, allow_empty=False)


class PolicyVocabularySerializer(serializers.Serializer):
    action_verbs = serializers.DictField(
        child=serializers.ListField(child=serializers.CharField()), allow_empty=False
    )
    data_types = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    purposes = serializers.DictField(child=serializers.ListField(child=serializers.CharField()))
    third_party_markers = serializers.ListField(child=serializers.CharField())
    abbreviations = serializers.ListField(child=serializers.CharField())


# ---------- Network exports ----------

class HeaderListField(serializers.Field):
    """Headers as [[name, value], ...] or {name: value} -> tuple of pairs."""

    def to_internal_value(self, data):
        if data is None:
            return ()
        if isinstance(data, dict):
            return tuple((str(k), str(v)) for k, v in data.items())
        if isinstance(data, list):
            pairs = []
            for item in data:
                if not isinstance(item, (list, tuple)) or len(item) != 2:
                    raise serializers.ValidationError("headers must be [name, value] pairs.")
                pairs.append((str(item[0]), str(item[1])))
            return tuple(pairs)
        raise serializers.ValidationError("headers must be a list of pairs or an object.")

    def to_representation(self, value):
        return [list(pair) for pair in value]


class HttpsFlowSerializer(serializers.Serializer):
    ts = serializers.FloatField()
    host = serializers.CharField()
    method = serializers.CharField()
    url = serializers.CharField()
    status = serializers.IntegerField(required=False, allow_null=True, default=None)
    req_headers = HeaderListField(required=False, default=())
    resp_headers = HeaderListField(required=False, default=())
    req_size = serializers.IntegerField(min_value=0, default=0)
    resp_size = serializers.IntegerField(min_value=0, default=0)
    body_excerpt = serializers.CharField(
        required=False, allow_null=True, allow_blank=True, trim_whitespace=False, default=None
    )
    client = serializers.CharField(required=False, allow_null=True, default=None)
    server = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_method(self, value):
        return value.upper()


# ---------- Policy flows ----------

class PolicyDataFlowSerializer(serializers.Serializer):
    action_verb = serializers.CharField()
    purpose_category = serializers.CharField(allow_blank=True, default='')
    specific_purpose = serializers.CharField(allow_blank=True, default='')
    entity_type = serializers.CharField(allow_blank=True, default='')
    data_types = serializers.ListField(child=serializers.CharField(), default=list)
    data_sources = serializers.ListField(child=serializers.CharField(), default=list)
    third_party = serializers.BooleanField(default=False)
    third_party_name = serializers.CharField(allow_null=True, allow_blank=True, default=None)
    exclusion = serializers.CharField(allow_null=True, allow_blank=True, default=None)
    negated = serializers.BooleanField(default=False)
    sentence = serializers.IntegerField(min_value=0)
    document = serializers.CharField(allow_blank=True, default='')
    sentence_text = serializers.CharField(allow_blank=True, default='')

    def validate_action_verb(self, value):
        return value.strip().lower()

    def validate_data_types(self, value):
        return [item.strip().lower() for item in value if item.strip()]


class RemoteExtractorResponseSerializer(serializers.Serializer):
    flows = PolicyDataFlowSerializer(many=True)


# ---------- Run config ----------

class PathField(serializers.CharField):
    """A path that must exist; relative paths resolve against context['base_dir']."""

    def __init__(self, *args, directory=False, **kwargs):
        self.directory = directory
        super().__init__(*args, **kwargs)

    def to_internal_value(self, data):
        path = Path(super().to_internal_value(data)).expanduser()
        base_dir = self.context.get('base_dir')
        if not path.is_absolute() and base_dir:
            path = Path(base_dir) / path
        if self.directory and not path.is_dir():
            raise serializers.ValidationError(f"directory does not exist: {path}")
        if not self.directory and not path.is_file():
            raise serializers.ValidationError(f"file does not exist: {path}")
        return path


class StaticConfigSerializer(serializers.Serializer):
    root = PathField(directory=True)


class SimilarityConfigSerializer(serializers.Serializer):
    catalogs = serializers.DictField(child=PathField(), allow_empty=False)
    threshold = serializers.FloatField(min_value=0, max_value=1, required=False)

    def validate_threshold(self, value):
        if value <= 0:
            raise serializers.ValidationError("threshold must be in (0, 1].")
        return value


class TraceInputSerializer(serializers.Serializer):
    trace = PathField()
    package = serializers.CharField()


class DynamicConfigSerializer(serializers.Serializer):
    traces = TraceInputSerializer(many=True, allow_empty=False)
    window = serializers.FloatField(required=False)
    bucket = serializers.FloatField(required=False)

    def validate_window(self, value):
        if value <= 0:
            raise serializers.ValidationError("window must be positive.")
        return value

    def validate_bucket(self, value):
        if value <= 0:
            raise serializers.ValidationError("bucket must be positive.")
        return value


class NetworkConfigSerializer(serializers.Serializer):
    pcaps = serializers.ListField(child=PathField(), default=list)
    flows = PathField(required=False)
    ps = PathField()
    netstat = PathField()
    dest_map = PathField(required=False)
    detectors = PathField(required=False)
    window = serializers.FloatField(required=False)

    def validate_window(self, value):
        if value <= 0:
            raise serializers.ValidationError("window must be positive.")
        return value

    def validate(self, attrs):
        if not attrs['pcaps'] and 'flows' not in attrs:
            raise serializers.ValidationError("at least one pcap or a flows export is required.")
        return attrs


class PolicyDocumentInputSerializer(serializers.Serializer):
    path = PathField()
    kind = serializers.ChoiceField(choices=['html', 'text'])


class PolicyConfigSerializer(serializers.Serializer):
    documents = PolicyDocumentInputSerializer(many=True, allow_empty=False)
    extractor = serializers.ChoiceField(choices=['rule', 'remote'], required=False)
    endpoint = serializers.URLField(required=False)
    chunk_sentences = serializers.IntegerField(min_value=1, required=False)

    def validate(self, attrs):
        if attrs.get('extractor') == 'remote' and not attrs.get('endpoint'):
            raise serializers.ValidationError({'endpoint': "required for the remote extractor."})
        return attrs


class RunConfigSerializer(serializers.Serializer):
    PHASES = ('static', 'dynamic', 'network', 'policy')

    oem = serializers.CharField()
    out = serializers.CharField(required=False)
    catalog = PathField(required=False)
    permissions = PathField(required=False)
    lexicon = PathField(required=False)
    taxonomy = PathField(required=False)
    static = StaticConfigSerializer(required=False)
    similarity = SimilarityConfigSerializer(required=False)
    dynamic = DynamicConfigSerializer(required=False)
    network = NetworkConfigSerializer(required=False)
    policy = PolicyConfigSerializer(required=False)

    def validate(self, attrs):
        if not any(phase in attrs for phase in self.PHASES):
            raise serializers.ValidationError(
                "at least one phase input (static, dynamic, network, policy) is required."
            )
        if 'static' in attrs and 'catalog' not in attrs:
            raise serializers.ValidationError({'catalog': "required by the static phase."})
        if 'similarity' in attrs and 'catalog' not in attrs:
            raise serializers.ValidationError({'catalog': "required by the similarity comparison."})
        return attrs


# ---------- Run history API ----------

class AnalysisRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = AnalysisRun
        fields = [
            'id',
            'oem',
            'status',
            'exit_code',
            'phases',
            'out_dir',
            'report_digest',
            'started_at',
            'finished_at',
        ]
