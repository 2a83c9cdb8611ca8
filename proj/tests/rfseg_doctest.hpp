#pragma once

// torch's logging shim claims the CHECK* macro names; doctest needs them.
// Include torch first, clear the names, then let doctest define its own.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_OP
#undef CHECK_NOTNULL
#undef DCHECK
#undef DCHECK_EQ
#undef DCHECK_NE
#undef DCHECK_LT
#undef DCHECK_LE
#undef DCHECK_GT
#undef DCHECK_GE
#undef DCHECK_NOTNULL
#undef LOG
#undef VLOG
#undef LOG_IF
#undef VLOG_IF
#undef VLOG_IS_ON

#include <doctest.h>
