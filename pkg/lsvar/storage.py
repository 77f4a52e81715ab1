"""Write-then-rename helpers for report files."""
import json
import os
import tempfile
from pathlib import Path


def atomic_write_text(path, text):
    """Write UTF-8 text with LF endings through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path


def write_json(path, payload):
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + '\n')


def write_frame(path, frame, sep=','):
    """Write a pandas DataFrame as delimited text."""
    return atomic_write_text(path, frame.to_csv(sep=sep, index=False, lineterminator='\n'))
