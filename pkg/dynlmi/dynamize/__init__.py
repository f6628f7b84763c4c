from .operators import Action, ActionLog, broaden, deepen, shorten
from .policy import DynamicIndex, PolicyConfig, enforce_policies, n_child_for, validate_policy
