# audit/logconfig.py
import json
import logging
import logging.config
from copy import deepcopy
from datetime import datetime, timezone

from django.conf import settings

# Attributes every LogRecord has; anything else was passed through `extra=`.
_RESERVED = set(vars(logging.makeLogRecord({}))) | {'message', 'asctime'}


class JsonFormatter(logging.Formatter):
    """One JSON object per line."""

    def format(self, record):
        payload = {
            'ts': datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED:
                payload[key] = value
        if record.exc_info:
            payload['exc'] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str, sort_keys=True)


def configure_logging(quiet=False, json_logs=False):
    """Re-apply settings.LOGGING with the CLI's --quiet / --json-logs switches."""
    config = deepcopy(settings.LOGGING)
    console = config['handlers']['console']
    if json_logs:
        console['formatter'] = 'json'
    if quiet:
        console['level'] = 'WARNING'
    logging.config.dictConfig(config)
