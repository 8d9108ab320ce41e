/* Dereferences a pointer read from uninitialized alloca storage. */
#include <alloca.h>
#include "std_testcase.h"

/* Opaque to the optimizer so the uninitialized load is actually emitted. */
__attribute__((noinline)) static double **launder(double **storage)
{
    __asm__ volatile("" : : "r"(storage) : "memory");
    return storage;
}

void CWE457_Use_of_Uninitialized_Variable__double_pointer_alloca_01_bad(void)
{
    double **pointer = launder((double **)alloca(sizeof(double *)));
    double *data = *pointer;
    printDoubleLine(*data);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE457_Use_of_Uninitialized_Variable__double_pointer_alloca_01_bad();
    printLine("Finished bad()");
    return 0;
}
