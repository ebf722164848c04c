"""Combined annotation tag set for joint entity/trigger tagging.

A schema lists the entity types and trigger types; the surface tag set is
derived from it: the outside tag ``O`` plus B/I tags for every type, with
an ``ENT``/``TRG`` role marker so one tag column covers both kinds of span
(``B-ENT:PER``, ``I-TRG:Movement``, ...).  Tag indices are fully determined
by the order of the type lists, so a schema file doubles as an index map.
"""

import hashlib
import json

OUTSIDE = "O"

ROLE_ENTITY = "entity"
ROLE_TRIGGER = "trigger"


class SchemaError(ValueError):
    pass


def _check_types(names, side):
    if not names:
        raise SchemaError(f"schema has no {side} types")
    seen = set()
    for name in names:
        if not name or name != name.strip() or any(c in name for c in "\t\n\r"):
            raise SchemaError(f"bad {side} type name: {name!r}")
        if name == OUTSIDE:
            raise SchemaError(f"{side} type may not be named {OUTSIDE!r}")
        if name in seen:
            raise SchemaError(f"duplicate {side} type: {name!r}")
        seen.add(name)


class TagSchema:
    """Ordered entity and trigger type lists plus the derived surface tags."""

    def __init__(self, entity_types, trigger_types):
        entity_types = tuple(entity_types)
        trigger_types = tuple(trigger_types)
        _check_types(entity_types, "entity")
        _check_types(trigger_types, "trigger")
        overlap = set(entity_types) & set(trigger_types)
        if overlap:
            raise SchemaError(f"types used on both sides: {sorted(overlap)}")
        self.entity_types = entity_types
        self.trigger_types = trigger_types
        self.outside = OUTSIDE

        combined = [OUTSIDE]
        for t in entity_types:
            combined += [f"B-ENT:{t}", f"I-ENT:{t}"]
        for t in trigger_types:
            combined += [f"B-TRG:{t}", f"I-TRG:{t}"]
        self.combined = tuple(combined)
        self._tag_index = {tag: i for i, tag in enumerate(self.combined)}

        # per-tag lookup tables, indexed by tag id
        self._role = [None]
        self._type_name = [None]
        self._begin = [False]
        for t in entity_types:
            self._role += [ROLE_ENTITY, ROLE_ENTITY]
            self._type_name += [t, t]
            self._begin += [True, False]
        for t in trigger_types:
            self._role += [ROLE_TRIGGER, ROLE_TRIGGER]
            self._type_name += [t, t]
            self._begin += [True, False]

        self._etype_index = {t: i for i, t in enumerate(entity_types)}
        self._ttype_index = {t: i for i, t in enumerate(trigger_types)}

    @property
    def n_tags(self):
        return len(self.combined)

    def tag_index(self, tag):
        try:
            return self._tag_index[tag]
        except KeyError:
            raise SchemaError(f"unknown tag name: {tag!r}") from None

    def tag_name(self, index):
        return self.combined[index]

    def is_outside(self, index):
        return index == 0

    def role(self, index):
        """'entity', 'trigger', or None for the outside tag."""
        return self._role[index]

    def type_name(self, index):
        return self._type_name[index]

    def is_begin(self, index):
        return self._begin[index]

    def entity_type_index(self, name):
        return self._etype_index[name]

    def trigger_type_index(self, name):
        return self._ttype_index[name]

    def entity_tag_ids(self, name):
        """(B, I) tag indices for an entity type."""
        b = 1 + 2 * self._etype_index[name]
        return b, b + 1

    def trigger_tag_ids(self, name):
        b = 1 + 2 * len(self.entity_types) + 2 * self._ttype_index[name]
        return b, b + 1

    def is_entity_type(self, name):
        return name in self._etype_index

    def is_trigger_type(self, name):
        return name in self._ttype_index

    def to_json(self):
        return json.dumps(
            {"entity_types": list(self.entity_types),
             "trigger_types": list(self.trigger_types)},
            indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema file is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise SchemaError("schema file must hold a JSON object")
        extra = set(obj) - {"entity_types", "trigger_types"}
        if extra:
            raise SchemaError(f"unknown schema keys: {sorted(extra)}")
        if "entity_types" not in obj or "trigger_types" not in obj:
            raise SchemaError("schema needs 'entity_types' and 'trigger_types'")
        return cls(obj["entity_types"], obj["trigger_types"])

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())

    def digest(self):
        """Stable hash of the schema, recorded in checkpoints and manifests."""
        key = json.dumps([list(self.entity_types), list(self.trigger_types)])
        return hashlib.sha256(key.encode("utf-8")).hexdigest()

    def __eq__(self, other):
        return (isinstance(other, TagSchema)
                and self.entity_types == other.entity_types
                and self.trigger_types == other.trigger_types)

    def __repr__(self):
        return (f"TagSchema(entities={list(self.entity_types)}, "
                f"triggers={list(self.trigger_types)})")
