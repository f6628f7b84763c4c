from dynlmi.core import Dataset, Vector, read_fvecs, write_fvecs
from dynlmi.dynamize import DynamicIndex, PolicyConfig, enforce_policies
from dynlmi.index import Index, IndexSettings, build_static, load_index, save_index
