import json

import pytest

from patchdesc.core import Change, ChangeOp, Patch

AVIO_DESCRIPTION = "avformat/avio: Fix null pointer dereference in case of memleak"

AVIO_CODE = (
    "static const URLProtocol *url_find_protocol(const char *filename)",  # 1
    "{",  # 2
    "    const URLProtocol **protocols;",  # 3
    "    char proto_str[128], proto_nested[128], *ptr;",  # 4
    "    size_t proto_len = strspn(filename, URL_SCHEME_CHARS);",  # 5
    "    int i;",  # 6
    "    av_strlcpy(proto_nested, proto_str, sizeof(proto_nested));",  # 7
    "    if ((ptr = strchr(proto_nested, '+')))",  # 8
    "        *ptr = '\\0';",  # 9
    "    protocols = ffurl_get_protocols(NULL, NULL);",  # 10
    "    for (i = 0; protocols[i]; i++) {",  # 11
    "        const URLProtocol *up = protocols[i];",  # 12
    "        if (!strcmp(filename, up->name)) {",  # 13
    "            av_freep(&protocols);",  # 14
    "            return up;",  # 15
    "        }",  # 16
    "    }",  # 17
    "    av_freep(&protocols);",  # 18
    "    return NULL;",  # 19
    "}",  # 20
)


def make_avio_patch(**overrides):
    fields = dict(
        id="c0ffee1",
        buggy_code=AVIO_CODE,
        changes=(
            Change(ChangeOp.ADDED, "    if (!protocols)", 11),
            Change(ChangeOp.ADDED, "        return NULL;", 11),
        ),
        author="avdev",
        time=1420000000.0,
        description=AVIO_DESCRIPTION,
        project="FFmpeg",
        file_path="libavformat/avio.c",
        function_name=None,
    )
    fields.update(overrides)
    return Patch(**fields)


@pytest.fixture
def avio_patch():
    return make_avio_patch()


def simple_patch(pid="p0", description="fix null pointer check", time=0.0, project="proj", author="alice", **kw):
    fields = dict(
        id=pid,
        buggy_code=("x = 1;", "y = x;"),
        changes=(Change(ChangeOp.ADDED, "if (!x) return;", 2),),
        author=author,
        time=time,
        description=description,
        project=project,
        file_path="src/a.c",
        function_name="g",
    )
    fields.update(kw)
    return Patch(**fields)


def record(pid="p0", **kw):
    rec = {
        "id": pid,
        "project": "proj",
        "file_path": "src/a.c",
        "function_name": "g",
        "author": "alice",
        "time": 0,
        "description": "fix null pointer check",
        "buggy_code": ["x = 1;", "y = x;"],
        "changes": [{"op": "add", "line": 2, "statement": "if (!x) return;"}],
    }
    rec.update(kw)
    return rec


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


# criterion number -> (passed, detail), filled by test_acceptance and echoed in the terminal summary
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
