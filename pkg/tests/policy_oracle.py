"""Exhaustive truth-table oracle for access decisions, written without the policy engine.

A case is (actor class, action, policy subject, policy actions, policy scope,
placement). The resource is always the Mileage submodel of asset A1 owned by
OWNER. Placement "store" puts the policy in the owner's store; "carried"
attaches it to an external copy hosted by HOST (which has no policies of its
own); "none" declares nothing.
"""

import itertools

ACTORS = {
    # class -> (bpn, role)
    "owner": ("OWNER", "Supplier"),
    "shop_x": ("X", "RepairShop"),
    "oem_y": ("Y", "OEM"),
}
ACTIONS = ["Read", "Write", "Copy", "Share"]
SUBJECTS = ["*", "bpn:X", "bpn:Z", "role:RepairShop", "role:Recycler"]
ACTION_SETS = [("Read",), ("Read", "Copy"), ("Write",), ("Read", "Copy", "Share")]
SCOPES = ["all", "kind:Mileage", "kind:StatusFlag", "asset:A1", "asset:A2"]
PLACEMENTS = ["store", "carried", "none"]

# does the subject name this actor class?
SUBJECT_MATCH = {
    ("*", "shop_x"): True,
    ("*", "oem_y"): True,
    ("bpn:X", "shop_x"): True,
    ("bpn:X", "oem_y"): False,
    ("bpn:Z", "shop_x"): False,
    ("bpn:Z", "oem_y"): False,
    ("role:RepairShop", "shop_x"): True,
    ("role:RepairShop", "oem_y"): False,
    ("role:Recycler", "shop_x"): False,
    ("role:Recycler", "oem_y"): False,
}
# does the scope cover (A1, Mileage)?
SCOPE_MATCH = {
    "all": True,
    "kind:Mileage": True,
    "kind:StatusFlag": False,
    "asset:A1": True,
    "asset:A2": False,
}


def expected(actor, action, subject, actions, scope, placement):
    if actor == "owner":
        return True
    if placement == "none":
        return False
    return SUBJECT_MATCH[(subject, actor)] and action in actions and SCOPE_MATCH[scope]


def cases():
    for actor, action, placement in itertools.product(ACTORS, ACTIONS, PLACEMENTS):
        if placement == "none":
            yield actor, action, None, None, None, placement
            continue
        for subject, actions, scope in itertools.product(SUBJECTS, ACTION_SETS, SCOPES):
            yield actor, action, subject, actions, scope, placement
