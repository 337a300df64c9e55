from .delete import delete_
from .select import count, find
from .update import update_
