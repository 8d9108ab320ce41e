/* Sizes an allocation from a pointer-sized element count and reports it. */
#include "std_testcase.h"

#define ELEMENT_COUNT 20

void CWE789_Uncontrolled_Mem_Alloc__malloc_char_fgets_01_bad(void)
{
    size_t data = ELEMENT_COUNT * sizeof(char *);
    char **table = (char **)malloc(data);
    if (table == NULL) {exit(-1);}
    printSizeTLine(data);
    free(table);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE789_Uncontrolled_Mem_Alloc__malloc_char_fgets_01_bad();
    printLine("Finished bad()");
    return 0;
}
